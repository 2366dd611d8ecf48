import json
import math
from dataclasses import replace

import numpy as np
import pytest

import neckstress as ns
from neckstress.harness import (
    CSV_SCHEMA,
    HarnessError,
    config_from_mapping,
    dumps_csv,
    load_config_file,
)

# a deliberately coarse, fast configuration for harness plumbing tests
FAST = replace(
    ns.ExperimentConfig(),
    eps_list=(1e-2, 3e-3, 1e-3, 3e-4),
    dx_min_frac=0.5, dx_max_frac=0.12, arc_frac=0.15, n_radial=6,
    radial_ratio=1.5,
)


FAST_FLAT = replace(FAST, kind="flat", r0=0.3, kappa0=4.0)


@pytest.fixture(scope="module")
def fast_rows():
    return ns.run_sweep(FAST)


@pytest.fixture(scope="module")
def fast_flat_rows():
    return ns.run_sweep(FAST_FLAT)


def test_fit_rate_synthetic_power():
    eps = np.logspace(-1, -4, 6)
    fit = ns.fit_rate([(e, e**-0.5) for e in eps])
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0)


def test_fit_rate_constant():
    eps = np.logspace(-1, -4, 5)
    fit = ns.fit_rate([(e, 3.7) for e in eps])
    assert fit.slope == pytest.approx(0.0, abs=1e-12)


def test_fit_rate_log_regime():
    eps = np.logspace(-2, -4, 8)
    pred = ns.predicted_rate(3, ("power", 2.0))    # 1/(eps |log eps|)
    fit = ns.fit_rate([(e, 1.0 / (e * abs(math.log(e)))) for e in eps], pred)
    assert -1.0 < fit.slope < -0.85
    assert fit.corrected_slope == pytest.approx(-1.0, abs=1e-9)


def test_fit_rate_scaling_invariance():
    eps = np.logspace(-1, -3, 6)
    vals = [(e, 2.3 * e**-0.7) for e in eps]
    f1 = ns.fit_rate(vals)
    f2 = ns.fit_rate([(e, 1e6 * v) for e, v in vals])
    assert abs(f1.slope - f2.slope) < 1e-12
    assert f2.intercept == pytest.approx(f1.intercept + math.log(1e6))


def test_fit_rate_validation():
    with pytest.raises(HarnessError):
        ns.fit_rate([(1e-1, 1.0), (1e-2, 2.0)])
    with pytest.raises(HarnessError):
        ns.fit_rate([(1e-1, 1.0), (1e-2, -2.0), (1e-3, 1.0), (1e-4, 1.0)])


def test_config_eps_must_decrease():
    with pytest.raises(HarnessError):
        replace(ns.ExperimentConfig(), eps_list=(1e-3, 1e-2))


def test_config_unknown_phi():
    with pytest.raises(HarnessError):
        replace(ns.ExperimentConfig(), phi="bogus")


def test_resolve_phi_selectors():
    pts = np.array([[0.5, 2.0], [-1.0, 3.0]])
    assert np.allclose(ns.resolve_phi("affine-x2")(pts), [[2.0, 0.0], [3.0, 0.0]])
    assert np.allclose(ns.resolve_phi("affine-x2x2")(pts), [[2.0, 2.0], [3.0, 3.0]])
    assert np.allclose(ns.resolve_phi("shear-twist")(pts), [[2.0, 1.0], [3.0, -3.0]])
    assert np.allclose(ns.resolve_phi("zero")(pts), 0.0)
    assert np.allclose(ns.resolve_phi("rigid:3")(pts), [[-2.0, 0.5], [-3.0, -1.0]])
    with pytest.raises(HarnessError):
        ns.resolve_phi("rigid:9")


def test_run_sweep_rows(fast_rows):
    assert len(fast_rows) == 4
    assert all(r["status"] == "ok" for r in fast_rows)
    eps = [r["eps"] for r in fast_rows]
    assert eps == sorted(eps, reverse=True)
    for r in fast_rows:
        assert np.isfinite(r["max_grad_u"])
        assert r["sys_residual"] <= 1e-10


def test_failures_recorded_in_row():
    bad = replace(FAST, eps_list=(1e-2, 1e-3), max_cells=300)
    rows = ns.run_sweep(bad)
    assert len(rows) == 2
    assert all(r["status"] == "error" for r in rows)
    assert all("MeshingError" in r["message"] for r in rows)


def test_csv_roundtrip(tmp_path, fast_rows):
    path = tmp_path / "sweep.csv"
    ns.write_csv(fast_rows, str(path))
    text = path.read_text()
    assert text.splitlines()[0] == CSV_SCHEMA
    rows = ns.read_csv(str(path))
    assert len(rows) == len(fast_rows)
    for a, b in zip(fast_rows, rows):
        assert b["eps"] == a["eps"]
        assert b["max_grad_u"] == a["max_grad_u"]   # full-precision floats
        assert b["status"] == a["status"]


def test_csv_append(tmp_path, fast_rows):
    path = tmp_path / "sweep.csv"
    ns.write_csv(fast_rows[:2], str(path))
    ns.write_csv(fast_rows[2:], str(path), append=True)
    rows = ns.read_csv(str(path))
    assert [r["eps"] for r in rows] == [r["eps"] for r in fast_rows]


def test_sweep_summary_fits(fast_rows):
    summary = ns.sweep_summary(FAST, fast_rows)
    assert summary["n_failed"] == 0
    assert "max_grad_u" in summary["fits"]
    fit = summary["fits"]["max_grad_u"]
    assert fit["predicted_exponent"] == pytest.approx(-0.5)
    assert json.dumps(summary)   # serializable


def test_compare_oracles_synthetic_pass():
    # rows whose a11 entries follow the oracle exactly must pass with ~0 dev
    cfg = replace(ns.ExperimentConfig(), kind="flat", r0=0.3)
    rows = []
    for eps in cfg.eps_list:
        row = {"eps": eps, "status": "ok"}
        for lab, (al, be) in ns.harness.DIAG_ENTRIES.items():
            row[f"a11_{lab}"] = ns.flat_entry_oracle(2, 0.6, eps, (al, be))
        for lab in ("12", "13", "23"):
            row[f"a11_{lab}"] = 0.0
        rows.append(row)
    rep = ns.compare_oracles(cfg, rows)
    assert rep["pass"]
    for entry in rep["entries"].values():
        assert entry["deviation"] < 1e-6


def test_compare_oracles_needs_rows():
    with pytest.raises(HarnessError):
        ns.compare_oracles(FAST, [{"status": "error", "eps": 1e-2}])


def test_config_file_load_and_override(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(
        "# geometry\n"
        "profile = flat\n"
        "r0 = 0.25\n"
        "eps-list = 1e-2, 1e-3, 1e-4, 1e-5\n"
        "phi = affine-x2x2\n"
        "max_cells = 50000\n"
    )
    mapping = load_config_file(str(path))
    cfg = config_from_mapping(mapping)
    assert cfg.kind == "flat"
    assert cfg.r0 == 0.25
    assert cfg.eps_list == (1e-2, 1e-3, 1e-4, 1e-5)
    assert cfg.phi == "affine-x2x2"
    assert cfg.max_cells == 50000
    # explicit overrides win
    cfg2 = config_from_mapping({"r0": 0.1}, cfg)
    assert cfg2.r0 == 0.1 and cfg2.kind == "flat"


def test_config_file_rejects_garbage(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("no equals sign here\n")
    with pytest.raises(HarnessError):
        load_config_file(str(path))
    with pytest.raises(HarnessError):
        config_from_mapping({"not_a_key": 1.0})


def test_dumps_csv_deterministic(fast_rows):
    assert dumps_csv(fast_rows) == dumps_csv(fast_rows)


def test_row_reproducible_in_isolation(fast_rows):
    row = ns.run_point(FAST, FAST.eps_list[1])
    for key, val in row.items():
        if isinstance(val, float) and np.isfinite(val):
            assert val == fast_rows[1][key]
        elif key != "message":
            assert val == fast_rows[1][key]


def test_sum_field_stays_bounded_along_sweep(fast_rows):
    # the v1+v2 gradients stay O(1) while v1 alone blows up like 1/eps
    fit_sum = ns.fit_rate([(r["eps"], r["sumgrad_1"]) for r in fast_rows])
    fit_v11 = ns.fit_rate([(r["eps"], r["maxgrad_v11"]) for r in fast_rows])
    assert abs(fit_sum.slope) <= 0.15
    assert abs(fit_v11.slope + 1.0) <= 0.2


def test_flat_max_gradient_insensitive_to_halving_eps():
    cfg = replace(FAST_FLAT, eps_list=(4e-3, 2e-3))
    rows = ns.run_sweep(cfg)
    ratio = rows[1]["max_grad_u"] / rows[0]["max_grad_u"]
    assert ratio < 1.3


def test_flat_offdiagonal_much_smaller_than_diagonal(fast_flat_rows):
    ratios = [abs(r["a11_12"]) / r["a11_11"] for r in fast_flat_rows]
    assert all(r < 1e-3 for r in ratios)
    assert ratios[-1] < ratios[0]


def test_gram_eigenvalue_trends(fast_rows, fast_flat_rows):
    # point contact: conditioning of a11 worsens as the gap closes;
    # flat contact: the smallest eigenvalue stays bounded below
    def eigs(row):
        a = np.array([
            [row["a11_11"], row["a11_12"], row["a11_13"]],
            [row["a11_12"], row["a11_22"], row["a11_23"]],
            [row["a11_13"], row["a11_23"], row["a11_33"]],
        ])
        w = np.linalg.eigvalsh(a)
        return w[0], w[-1]

    rel = [lo / hi for lo, hi in map(eigs, fast_rows)]
    assert all(b < a for a, b in zip(rel, rel[1:]))
    lo_flat = [eigs(r)[0] for r in fast_flat_rows]
    assert min(lo_flat) > 0.25 * lo_flat[0]


def test_gram_diagonals_approach_analytic_constants():
    """As the gap closes, the translation diagonals converge to the fiber
    energies mu*pi/sqrt(eps) and (lam+2mu)*pi/sqrt(eps) of the gap-linear
    profile, pinning the material constants quantitatively."""
    import math
    base = math.pi / math.sqrt(1e-4)
    for lam, mu in ((1.0, 1.0), (2.0, 0.5)):
        cfg = replace(ns.ExperimentConfig(), lam=lam, mu=mu)
        row = ns.run_point(cfg, 1e-4)
        assert row["status"] == "ok"
        assert abs(row["a11_11"] / (mu * base) - 1.0) < 0.06
        assert abs(row["a11_22"] / ((lam + 2 * mu) * base) - 1.0) < 0.06
