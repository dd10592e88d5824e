"""Stages behind the command-line interface: plan, sample, fit, certify, validate."""
from __future__ import annotations

import json
import math
import time
from pathlib import Path

import numpy as np

from .config import RunConfig
from .dro import certify_perf_bounds
from .errors import ConfigError
from .risk import RiskSpec, calibrate_scale, cvar_alpha, cvar_certified_interval, gamma_robustness, plan_cvar_samples
from .sampling import OutputSamples, collect_outputs, derive_seed, perf_samples, save_samples
from .support import FittedSupport, diameter_bound, fit_support, save_support, scenario_sample_size, violation_rate


def scenario_N(cfg: RunConfig) -> int:
    return scenario_sample_size(cfg.eps1, cfg.beta1, cfg.template.n, cfg.template.L)


def _draw(cfg: RunConfig, N: int, label: str, seed: int | None = None) -> OutputSamples:
    return collect_outputs(cfg.model, cfg.dist, N, cfg.seed if seed is None else seed, label=label, threads=cfg.threads)


def risk_geometry(cfg: RunConfig) -> dict:
    """Space, dimension, Lipschitz constant and diameter used for the CVaR radius.

    ``perf`` space: the law of h(Y) on the line, diameter = L_h times the
    output-set diameter. ``output`` space: the law of Y itself, constant L_h.
    Without an explicit ``rho`` the diameter comes from a pilot support fit.
    """
    if cfg.calibrate is not None:
        c = cfg.calibrate
        scale = calibrate_scale(int(c["N"]), float(c["alpha"]), float(c["beta"]), float(c["H"]))
        return {"space": "perf", "n": 1, "L0": 1.0, "rho": scale, "source": "calibrated"}
    L_h = cfg.perf.lipschitz()
    n = 1 if cfg.risk_space == "perf" else cfg.model.output_dim
    L0 = cfg.L0 if cfg.L0 is not None else (1.0 if cfg.risk_space == "perf" else L_h)
    if cfg.rho is not None:
        return {"space": cfg.risk_space, "n": n, "L0": L0, "rho": cfg.rho, "source": "config"}
    pilot = fit_support(cfg.template, _draw(cfg, scenario_N(cfg), "pilot"), cfg.eps1, cfg.beta1)
    diam = diameter_bound(pilot)
    rho = L_h * diam if cfg.risk_space == "perf" else diam
    return {"space": cfg.risk_space, "n": n, "L0": L0, "rho": rho, "source": "pilot"}


def _spec(geom: dict, alpha: float, beta: float, H: float) -> RiskSpec:
    return RiskSpec(alpha, beta, H, L0=geom["L0"], rho=geom["rho"], n=geom["n"])


def run_plan(cfg: RunConfig) -> dict:
    geom = risk_geometry(cfg)
    rows = []
    for a in cfg.alphas:
        for b in cfg.betas:
            for H in cfg.Hs:
                rows.append({"alpha": a, "beta": b, "H": H, "N": plan_cvar_samples(_spec(geom, a, b, H))})
    return {"scenario_N": scenario_N(cfg), "geometry": geom, "cvar": rows}


def resolve_N(cfg: RunConfig, geom: dict) -> int:
    if cfg.N != "plan":
        return int(cfg.N)
    need = max(plan_cvar_samples(_spec(geom, a, cfg.beta, cfg.H)) for a in cfg.alphas)
    return max(scenario_N(cfg), need)


def run_sample(cfg: RunConfig, N: int | None = None) -> OutputSamples:
    if N is None:
        N = resolve_N(cfg, risk_geometry(cfg)) if cfg.N == "plan" else int(cfg.N)
    return _draw(cfg, N, "outputs")


def run_fit(cfg: RunConfig, samples: OutputSamples | None = None) -> FittedSupport:
    if samples is None:
        samples = _draw(cfg, scenario_N(cfg), "outputs")
    return fit_support(cfg.template, samples, cfg.eps1, cfg.beta1)


def run_certify(cfg: RunConfig) -> dict:
    t0 = time.perf_counter()
    geom = risk_geometry(cfg)
    N = resolve_N(cfg, geom)
    samples = _draw(cfg, N, "outputs")
    fs = fit_support(cfg.template, samples, cfg.eps1, cfg.beta1)
    hvals = perf_samples(samples, cfg.perf)
    t_sample = time.perf_counter()

    certs = []
    for a in cfg.alphas:
        spec = _spec(geom, a, cfg.beta, cfg.H)
        c = cvar_certified_interval(hvals, spec, seed=cfg.seed)
        if geom["n"] > 1:
            c.warnings.append("radius computed in output space, interval reported on h")
        certs.append(c.to_dict())
    if cfg.dro_enabled:
        upper, lower = certify_perf_bounds(
            cfg.perf, samples, fs, cfg.beta2, seed=cfg.seed, max_rule_confidence=cfg.max_rule_confidence
        )
        certs += [c.to_dict() for c in (upper, lower) if c is not None]
    t_cert = time.perf_counter()

    holdout = _draw(cfg, cfg.holdout, "holdout")
    h_hold = perf_samples(holdout, cfg.perf)
    diagnostics = {
        "holdout_N": holdout.N,
        "violation_rate": violation_rate(fs, holdout),
        "empirical_mean": float(np.mean(h_hold)),
        "empirical_cvar": {str(a): cvar_alpha(h_hold, a) for a in cfg.alphas},
    }
    return {
        "config": cfg.raw,
        "samples": samples.metadata(),
        "risk_geometry": geom,
        "support": fs.to_dict(),
        "certificates": certs,
        "diagnostics": diagnostics,
        "gamma_robustness": gamma_robustness(cfg.H),
        "timing": {
            "sampling_seconds": t_sample - t0,
            "certify_seconds": t_cert - t_sample,
            "total_seconds": time.perf_counter() - t0,
        },
        "_samples": samples,
        "_support": fs,
        "_perf": cfg.perf,
    }


def run_validate(cfg: RunConfig) -> dict:
    """Repeat the support fit on fresh samples and count trials whose holdout violation exceeds eps1."""
    if cfg.validate_holdout < 1:
        raise ConfigError("validation needs a positive holdout size")
    N = scenario_N(cfg)
    rates = []
    for t in range(cfg.trials):
        fit = _draw(cfg, N, "validate-fit", derive_seed(cfg.seed, "validate-fit", t))
        fs = fit_support(cfg.template, fit, cfg.eps1, cfg.beta1)
        hold = _draw(cfg, cfg.validate_holdout, "validate-holdout", derive_seed(cfg.seed, "validate-holdout", t))
        rates.append(violation_rate(fs, hold))
    rates = np.array(rates)
    failures = int((rates > cfg.eps1).sum())
    allowed = cfg.beta1 + 3.0 * math.sqrt(cfg.beta1 * (1 - cfg.beta1) / cfg.trials)
    return {
        "N": N,
        "trials": cfg.trials,
        "holdout": cfg.validate_holdout,
        "eps1": cfg.eps1,
        "beta1": cfg.beta1,
        "violation_rates": rates.tolist(),
        "mean_violation": float(rates.mean()),
        "failure_fraction": failures / cfg.trials,
        "allowed_fraction": allowed,
        "passed": failures / cfg.trials <= allowed,
    }


def public(report: dict) -> dict:
    return {k: v for k, v in report.items() if not k.startswith("_")}


def write_report(report: dict, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if "_samples" in report:
        save_samples(report["_samples"], out / "samples.csv", h=report.get("_perf"))
    if "_support" in report:
        save_support(report["_support"], out / "support.json")
    path = out / "report.json"
    path.write_text(json.dumps(public(report), indent=1, sort_keys=True))
    return path
