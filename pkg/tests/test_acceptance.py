"""Acceptance checks, one group per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary prints
one PASS/FAIL line per criterion.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy.optimize import root

from alr_lab import labels as lab
from alr_lab.cli import format_param_count, main
from alr_lab.config import from_dict
from alr_lab.datasets import confusable_preset, confusable_spec, separable_preset
from alr_lab.demo import P_STUDENT, Q_SOFT, kd_contradiction
from alr_lab.gradcheck import LOSS_TERMS, check_mlp, check_term
from alr_lab.losses import (KDConfig, hard_ce, kd_soft_loss, kd_target, residual_loss,
                            total_loss, update_loss)
from alr_lab.numeric import RngStream, softmax
from alr_lab.residual import ResidualCorrelationMatrix, init_uniform
from alr_lab.training import train

crit = pytest.mark.criterion


def random_point(stream, K, batch=1):
    z = 3.0 * stream.gaussian(batch * K).reshape(batch, K)
    y = (stream.uniform(batch) * K).astype(np.int64)
    S = ResidualCorrelationMatrix(2.0 * stream.gaussian(K * (K - 1)).reshape(K, K - 1))
    return z, y, S


# 1 -------------------------------------------------------------------------

@crit(1, "gradient fidelity of every loss term and the end-to-end MLP")
@pytest.mark.parametrize("K", [3, 6, 10])
@pytest.mark.parametrize("term", LOSS_TERMS)
def test_loss_gradient_fidelity(term, K):
    row = check_term(term, K, points=100, seed=11, h=1e-5)
    assert row.points == 100
    assert row.max_rel_error <= 1e-6, row


@crit(1, "gradient fidelity of every loss term and the end-to-end MLP")
def test_mlp_gradient_fidelity():
    row = check_mlp(points=100, dims=(5, 8, 4), seed=11)
    assert row.max_rel_error <= 1e-5, row


# 2 -------------------------------------------------------------------------

@crit(2, "hard and residual gradients equal p - q and p_res - q_res")
def test_exact_gradient_forms():
    stream = RngStream(2)
    for K in (3, 6, 10):
        for _ in range(50):
            z, y, S = random_point(stream, K)
            z, k = z[0], int(y[0])
            _, g = hard_ce(z, k)
            np.testing.assert_allclose(g, softmax(z) - lab.one_hot(k, K), rtol=0, atol=1e-12)
            q_res = S.residual_label(k)
            _, g_res = residual_loss(z, k, q_res)
            expected = softmax(lab.erase(z, k)) - q_res
            np.testing.assert_allclose(lab.erase(g_res, k), expected, rtol=0, atol=1e-12)
            assert g_res[k] == 0.0


# 3 -------------------------------------------------------------------------

@crit(3, "hard and soft gradients on the true class are -0.3 and +0.1")
def test_kd_contradiction_values():
    np.testing.assert_array_equal(P_STUDENT, [0.7, 0.2, 0.1])
    np.testing.assert_array_equal(Q_SOFT, [0.6, 0.3, 0.1])
    r = kd_contradiction(temperature=1.0)
    assert r["grad_hard"][0] == pytest.approx(-0.3, abs=1e-15)
    assert r["grad_soft"][0] == pytest.approx(0.1, abs=1e-15)
    assert np.sign(r["grad_hard"][0]) == -np.sign(r["grad_soft"][0])
    assert r["sign_hard"] == -1 and r["sign_soft"] == 1


# 4 -------------------------------------------------------------------------

@crit(4, "kd_target equals the numerical zero of the blended gradient")
def test_kd_target_fixed_point():
    rng = np.random.default_rng(4)
    for _ in range(50):
        K = int(rng.integers(2, 11))
        q_soft = rng.dirichlet(np.ones(K))
        alpha = float(rng.uniform(0.01, 0.99))
        k = int(rng.integers(K))
        q = np.eye(K)[k]

        def blended(u):
            p = softmax(np.append(u, 0.0))
            return ((1 - alpha) * (p - q) + alpha * (p - q_soft))[:-1]

        sol = root(blended, np.zeros(K - 1), method="hybr", tol=1e-14)
        # hybr may stop at the xtol floor; accept any point where the gradient vanishes.
        assert np.max(np.abs(blended(sol.x))) <= 1e-13
        p_star = softmax(np.append(sol.x, 0.0))
        assert np.max(np.abs(kd_target(k, q_soft, KDConfig(alpha, 1.0)) - p_star)) <= 1e-9


# 5 -------------------------------------------------------------------------

@crit(5, "stop-gradient contracts hold bit-exactly")
def test_stop_gradients():
    stream = RngStream(5)
    for K in (3, 6, 10):
        z, y, S = random_point(stream, K, batch=7)
        acc = 0.37
        bundle = total_loss(z, y, S, acc)
        # Logit gradient is hard + weighted residual only: the update term adds nothing.
        _, g_hard = hard_ce(z, y)
        _, g_res = residual_loss(z, y, S.residual_labels(y))
        assert np.array_equal(bundle.grad_z, g_hard + (1 - acc) * g_res)
        # S gradient is the update gradient only, whatever the residual weight.
        _, g_upd = update_loss(z, y, S)
        assert np.array_equal(bundle.grad_S, g_upd)
        for a in (0.0, 0.5, 1.0):
            assert np.array_equal(total_loss(z, y, S, a).grad_S, g_upd)


# 6 -------------------------------------------------------------------------

@crit(6, "zero-init S is uniform with maximum entropy; fixed matrix gives zero gradient")
@pytest.mark.parametrize("K", [2, 3, 4, 10, 50])
def test_uniform_initialisation(K):
    S = init_uniform(K)
    assert np.all(S.S == 0.0)
    labels = S.residual_labels()
    assert np.max(np.abs(labels - 1.0 / (K - 1))) <= 1e-12
    assert np.mean(S.row_entropy()) == pytest.approx(math.log(K - 1), abs=1e-12)


@crit(6, "zero-init S is uniform with maximum entropy; fixed matrix gives zero gradient")
@pytest.mark.parametrize("K", [3, 6, 10])
def test_uniform_residual_target_gives_zero_gradient(K):
    for k in range(K):
        z = np.full(K, -0.7)
        z[k] = 4.2
        _, g = residual_loss(z, k, init_uniform(K).residual_label(k))
        assert np.max(np.abs(g)) <= 1e-15


# 7 -------------------------------------------------------------------------

@crit(7, "at acc_train = 1 the backbone gradient equals the hard-only gradient")
def test_full_accuracy_weight():
    stream = RngStream(7)
    for K in (3, 6, 10):
        z, y, S = random_point(stream, K, batch=16)
        bundle = total_loss(z, y, S, 1.0)
        assert bundle.res_weight == 0.0
        np.testing.assert_allclose(bundle.grad_z, hard_ce(z, y)[1], rtol=0, atol=1e-12)


@crit(7, "at acc_train = 1 the backbone gradient equals the hard-only gradient")
def test_full_accuracy_weight_inside_training():
    cfg = from_dict({"method": "alr", "dataset": {"preset": "separable"}, "epochs": 3,
                     "batch_size": 50, "seed": 1})
    tr, te = separable_preset(1)
    seen = []

    def hook(info):
        if info.acc_train == 1.0:
            seen.append(np.max(np.abs(info.grad_z - hard_ce(info.logits, info.labels)[1])))

    train(cfg, tr, te, on_batch=hook)
    assert seen, "no batch was trained at full running accuracy"
    assert max(seen) <= 1e-12


# 8 -------------------------------------------------------------------------

@crit(8, "ALR adds exactly K(K-1) parameters")
def test_parameter_accounting(tmp_path):
    for K in (2, 3, 10, 100):
        assert init_uniform(K).num_params == K * (K - 1)
    assert init_uniform(10).num_params == 90
    assert format_param_count(90) == "0.1K"
    cfg = {"method": "alr", "dataset": {"preset": "confusable"}, "epochs": 1,
           "output_dir": str(tmp_path / "alr")}
    (tmp_path / "alr.json").write_text(json.dumps(cfg))
    (tmp_path / "base.json").write_text(json.dumps({**cfg, "method": "baseline",
                                                    "output_dir": str(tmp_path / "base")}))
    assert main(["train", "-c", str(tmp_path / "alr.json")]) == 0
    assert main(["train", "-c", str(tmp_path / "base.json")]) == 0
    alr = json.loads((tmp_path / "alr" / "summary.json").read_text())
    base = json.loads((tmp_path / "base" / "summary.json").read_text())
    assert alr["param_overhead"] == 12
    assert alr["param_counts"]["total"] - base["param_counts"]["total"] == 12


# 9 -------------------------------------------------------------------------

def bayes_confusion_mc(spec, n=200_000, seed=0):
    rng = np.random.default_rng(seed)
    means, stds = np.array(spec.means), np.array(spec.stds)
    K, d = means.shape
    conf = np.zeros((K, K))
    for k in range(K):
        x = means[k] + stds[k] * rng.normal(size=(n, d))
        loglik = -0.5 * ((x[:, None, :] - means[None]) ** 2).sum(-1) / stds**2 - d * np.log(stds)
        conf[k] = np.bincount(loglik.argmax(1), minlength=K) / n
    return conf


@crit(9, "S learns the 0 <-> 1 confusion on the confusable preset")
def test_bayes_oracle_plausibility():
    conf = bayes_confusion_mc(confusable_spec())
    off = conf - np.diag(np.diag(conf))
    assert np.argmax(off[0]) == 1 and np.argmax(off[1]) == 0


@crit(9, "S learns the 0 <-> 1 confusion on the confusable preset")
@pytest.mark.slow
def test_confusion_structure_learning():
    start = time.perf_counter()
    hits = 0
    for seed in range(10):
        cfg = from_dict({"method": "alr", "dataset": {"preset": "confusable"},
                         "epochs": 50, "seed": seed, "snapshot_epochs": [50]})
        tr, te = confusable_preset(seed)
        S = train(cfg, tr, te).snapshots[50]
        to_class = lambda k: lab.residual_to_class(int(np.argmax(S.residual_label(k))), k)
        hits += to_class(0) == 1 and to_class(1) == 0
    elapsed = time.perf_counter() - start
    assert hits >= 9, f"only {hits}/10 seeds"
    assert elapsed < 120.0


# 10 ------------------------------------------------------------------------

@crit(10, "baseline and ALR-S reach 99% on the separable preset")
@pytest.mark.parametrize("method", ["baseline", "alr-s"])
def test_training_sanity(method):
    cfg = from_dict({"method": method, "dataset": {"preset": "separable"}, "epochs": 100, "seed": 0})
    tr, te = separable_preset(0)
    result = train(cfg, tr, te)
    assert result.final.test_acc >= 0.99


# 11 ------------------------------------------------------------------------

def _tree(path):
    return {p.relative_to(path).as_posix(): p.read_bytes()
            for p in sorted(path.rglob("*")) if p.is_file() and p.name != "summary.json"}


@crit(11, "identical config and seed give byte-identical outputs")
@pytest.mark.parametrize("method", ["alr", "alr-s", "lsr", "baseline"])
def test_train_determinism(tmp_path, method):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"method": method, "dataset": {"preset": "confusable"},
                               "epochs": 6, "seed": 9}))
    for name in ("a", "b"):
        assert main(["train", "-c", str(cfg), "-o", str(tmp_path / name)]) == 0
    a, b = _tree(tmp_path / "a"), _tree(tmp_path / "b")
    assert "metrics.csv" in a and a == b
    if method.startswith("alr"):
        assert {"S_epoch1.csv", "S_epoch5.csv", "S_epoch6.pgm"} <= set(a)


@crit(11, "identical config and seed give byte-identical outputs")
def test_compare_and_heatmap_determinism(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dataset": {"preset": "confusable"}, "epochs": 5}))
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["compare", "-c", str(cfg), "--methods", "baseline,alr", "--seeds", "1,2",
                     "-o", str(out)]) == 0
        assert main(["export-heatmap", "-r", str(out / "alr" / "seed1"), "-e", "1,5"]) == 0
    a, b = _tree(tmp_path / "a"), _tree(tmp_path / "b")
    assert "compare.csv" in a and "alr/seed1/entropy.csv" in a and a == b


@crit(11, "identical config and seed give byte-identical outputs")
@pytest.mark.parametrize("argv", [["gradcheck", "--points", "5"], ["kd-demo"]])
def test_report_command_determinism(argv, capsys):
    outs = []
    for _ in range(2):
        main(argv)
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1]


# 12 ------------------------------------------------------------------------

@crit(12, "mean row entropy is computed per epoch, bounded and exported")
def test_entropy_diagnostic(tmp_path):
    epochs = 12
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"method": "alr", "dataset": {"preset": "confusable"},
                               "epochs": epochs, "seed": 2, "output_dir": str(tmp_path / "run")}))
    assert main(["train", "-c", str(cfg)]) == 0
    run = tmp_path / "run"
    lines = (run / "metrics.csv").read_text().splitlines()
    header = lines[0].split(",")
    col = header.index("mean_row_entropy")
    values = {int(l.split(",")[0]): l.split(",")[col] for l in lines[1:]}
    assert sorted(values) == list(range(1, epochs + 1))
    bound = math.log(4 - 1)
    for h in values.values():
        assert 0.0 <= float(h) <= bound + 1e-12
    assert main(["export-heatmap", "-r", str(run), "-e", "1,5,10,12"]) == 0
    exported = [l.split(",") for l in (run / "entropy.csv").read_text().splitlines()[1:]]
    assert [int(e) for e, _ in exported] == [1, 5, 10, 12]
    for e, h in exported:
        assert h == values[int(e)]
