"""Run configuration (YAML or JSON)."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .bnn import BnnModel, load_model
from .errors import CertError, ConfigError
from .inputs import InputDistribution, distribution_from_dict
from .perf import PerfFn, perf_from_dict
from .support import Template, make_template


def _as_list(v) -> list:
    return list(v) if isinstance(v, (list, tuple)) else [v]


@dataclass
class RunConfig:
    raw: dict
    base_dir: Path
    model_path: Path
    model: BnnModel
    dist: InputDistribution
    perf: PerfFn
    template: Template
    eps1: float
    beta1: float
    alphas: list[float]
    betas: list[float]
    Hs: list[float]
    risk_space: str
    rho: float | None
    L0: float | None
    calibrate: dict | None
    dro_enabled: bool
    beta2: float
    max_rule_confidence: bool
    N: int | str
    seed: int
    holdout: int
    trials: int
    validate_holdout: int
    threads: int = 1
    out: Path = field(default_factory=lambda: Path("out"))

    @property
    def H(self) -> float:
        return self.Hs[0]

    @property
    def beta(self) -> float:
        return self.betas[0]


def _prob(v, name, closed_right=False) -> float:
    try:
        v = float(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a number") from exc
    ok = 0 < v <= 1 if closed_right else 0 < v < 1
    if not ok:
        raise ConfigError(f"{name}={v} outside {'(0, 1]' if closed_right else '(0, 1)'}")
    return v


def parse_config(raw: dict, base_dir: Path, *, seed: int | None = None, threads: int | None = None, out=None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    try:
        model_path = Path(raw["model"])
        if not model_path.is_absolute():
            model_path = base_dir / model_path
        if not model_path.exists():
            raise ConfigError(f"model file {model_path} does not exist")
        try:
            model = load_model(model_path)
        except CertError as exc:
            raise ConfigError(f"model file {model_path}: {exc}") from exc
        dist = distribution_from_dict(raw["input"], base_dir)
        perf = perf_from_dict(raw["perf"])

        tmpl = raw.get("template", {"kind": "box"})
        try:
            template = make_template(tmpl["kind"], model.output_dim, tmpl.get("L"), tmpl.get("seed"))
        except CertError as exc:
            raise ConfigError(f"template: {exc}") from exc

        sup = raw.get("support", {})
        eps1 = _prob(sup.get("eps1", 0.05), "support.eps1")
        beta1 = _prob(sup.get("beta1", 0.05), "support.beta1")

        risk = raw["risk"]
        alphas = [_prob(a, "risk.alphas", closed_right=True) for a in _as_list(risk.get("alphas", [1.0]))]
        betas = [_prob(b, "risk.beta") for b in _as_list(risk.get("beta", 0.05))]
        Hs = [float(h) for h in _as_list(risk["H"])]
        if any(h <= 0 for h in Hs):
            raise ConfigError("risk.H must be positive")
        space = risk.get("space", "perf")
        if space not in ("perf", "output"):
            raise ConfigError("risk.space must be 'perf' or 'output'")
        rho = risk.get("rho")
        L0 = risk.get("L0")
        calibrate = risk.get("calibrate")
        if calibrate is not None and not {"N", "alpha", "beta", "H"} <= set(calibrate):
            raise ConfigError("risk.calibrate needs N, alpha, beta and H")

        dro = raw.get("dro", {})
        beta2 = _prob(dro.get("beta2", betas[0]), "dro.beta2")

        N = raw.get("N", "plan")
        if N != "plan":
            N = int(N)
            if N < 1:
                raise ConfigError("N must be positive or 'plan'")

        seed = raw.get("seed") if seed is None else seed
        if seed is None:
            raise ConfigError("a seed is required")

        val = raw.get("validate", {})
        trials = int(val.get("trials", 200))
        v_holdout = int(val.get("holdout", 100_000))
        holdout = int(raw.get("holdout", 10_000))
        if trials < 1:
            raise ConfigError("validate.trials must be at least 1")
        if v_holdout < 1 or holdout < 1:
            raise ConfigError("holdout size must be at least 1")
    except KeyError as exc:
        raise ConfigError(f"missing config field {exc}") from exc

    if perf.dim is not None and perf.dim != model.output_dim:
        raise ConfigError(f"performance function takes dim {perf.dim}, model outputs {model.output_dim}")
    if dist.dim != model.input_dim:
        raise ConfigError(f"input distribution has dim {dist.dim}, model expects {model.input_dim}")

    return RunConfig(
        raw=raw,
        base_dir=base_dir,
        model_path=model_path,
        model=model,
        dist=dist,
        perf=perf,
        template=template,
        eps1=eps1,
        beta1=beta1,
        alphas=alphas,
        betas=betas,
        Hs=Hs,
        risk_space=space,
        rho=None if rho is None else float(rho),
        L0=None if L0 is None else float(L0),
        calibrate=calibrate,
        dro_enabled=bool(dro.get("enabled", True)),
        beta2=beta2,
        max_rule_confidence=bool(dro.get("max_rule_confidence", False)),
        N=N,
        seed=int(seed),
        holdout=holdout,
        trials=trials,
        validate_holdout=v_holdout,
        threads=int(threads or raw.get("threads", 1)),
        out=Path(out) if out is not None else Path(raw.get("out", "out")),
    )


def load_config(path, **overrides) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(raw, path.parent, **overrides)
