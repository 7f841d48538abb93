"""Flat key=value run configuration: fully validated, fail-closed.

Unknown keys, type mismatches and range violations raise ConfigError naming
the key and line.  The echo of a parsed config lists every key with its
effective value, so a run is reproducible from its echoed config alone.
"""

from dataclasses import dataclass, field

from .errors import ConfigError

_MATERIAL_KINDS = ("saint-venant-kirchhoff", "linear-isotropic")
_INIT_MODES = ("radial", "swirl")
_EXPERIMENTS = ("single", "gamma-sweep", "dt-study", "identity-suite", "material-check")


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _float_list(text):
    return [float(tok) for tok in text.split(",") if tok.strip()]


# key -> (attribute, parser, default, validator, description)
_KEYS = {
    "dimension": ("dimension", int, 2, lambda v: v in (2, 3), "2 or 3"),
    "inner_radius": ("inner_radius", float, 0.4, lambda v: v > 0, "> 0"),
    "outer_radius": ("outer_radius", float, 1.0, lambda v: v > 0, "> 0"),
    "resolution": ("resolution", int, 8, lambda v: v >= 4, ">= 4"),
    "material.kind": ("material_kind", str, "saint-venant-kirchhoff",
                      lambda v: v in _MATERIAL_KINDS, f"one of {_MATERIAL_KINDS}"),
    "material.lambda": ("material_lambda", float, 1.0, lambda v: v >= 0, ">= 0"),
    "material.mu": ("material_mu", float, 1.0, lambda v: v > 0, "> 0"),
    "material.gamma0": ("material_gamma0", float, 0.1, lambda v: v > 0, "> 0"),
    "gamma": ("gamma", float, 1.0, lambda v: v >= 0, ">= 0"),
    "dt": ("dt", float, 1e-3, lambda v: v > 0, "> 0"),
    "t_end": ("t_end", float, 2.0, lambda v: v >= 0, ">= 0"),
    "viscosity": ("viscosity", float, 1.0, lambda v: v > 0, "> 0"),
    "epsilon1": ("epsilon1", float, 0.1, lambda v: v > 0, "> 0"),
    "epsilon0": ("epsilon0", float, 1e-2, lambda v: v > 0, "> 0"),
    "include_convection": ("include_convection", _bool, False, None, "boolean"),
    "init.amplitude": ("init_amplitude", float, 1e-3, lambda v: v >= 0, ">= 0"),
    "init.mode": ("init_mode", str, "radial", lambda v: v in _INIT_MODES,
                  f"one of {_INIT_MODES}"),
    "newton.tol": ("newton_tol", float, 1e-10, lambda v: v > 0, "> 0"),
    "newton.maxit": ("newton_maxit", int, 25, lambda v: v >= 1, ">= 1"),
    "coupling.tol": ("coupling_tol", float, 1e-3, lambda v: v > 0, "> 0"),
    "identity.window_start": ("identity_window_start", float, 0.1, lambda v: v >= 0, ">= 0"),
    "output.csv": ("output_csv", str, "run.csv", None, "path"),
    "output.vtk_every": ("output_vtk_every", int, 0, lambda v: v >= 0, ">= 0"),
    "experiment.kind": ("experiment_kind", str, "single",
                        lambda v: v in _EXPERIMENTS, f"one of {_EXPERIMENTS}"),
    "sweep.gamma": ("sweep_gamma", _float_list, [0.0, 0.5, 1.0, 2.0],
                    lambda v: all(g >= 0 for g in v), "nonnegative list"),
    "sweep.dt": ("sweep_dt", _float_list, [1e-2, 5e-3, 2.5e-3],
                 lambda v: all(x > 0 for x in v), "positive list"),
    "seed": ("seed", int, 0, lambda v: v >= 0, ">= 0"),
}


@dataclass
class RunConfig:
    dimension: int = 2
    inner_radius: float = 0.4
    outer_radius: float = 1.0
    resolution: int = 8
    material_kind: str = "saint-venant-kirchhoff"
    material_lambda: float = 1.0
    material_mu: float = 1.0
    material_gamma0: float = 0.1
    gamma: float = 1.0
    dt: float = 1e-3
    t_end: float = 2.0
    viscosity: float = 1.0
    epsilon1: float = 0.1
    epsilon0: float = 1e-2
    include_convection: bool = False
    init_amplitude: float = 1e-3
    init_mode: str = "radial"
    newton_tol: float = 1e-10
    newton_maxit: int = 25
    coupling_tol: float = 1e-3
    identity_window_start: float = 0.1
    output_csv: str = "run.csv"
    output_vtk_every: int = 0
    experiment_kind: str = "single"
    sweep_gamma: list = field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0])
    sweep_dt: list = field(default_factory=lambda: [1e-2, 5e-3, 2.5e-3])
    seed: int = 0

    def echo(self):
        lines = []
        for key, (attr, parser, _, _, _) in sorted(_KEYS.items()):
            val = getattr(self, attr)
            if parser is _float_list:
                val = ",".join(repr(x) for x in val)
            elif parser is _bool:
                val = "true" if val else "false"
            lines.append(f"{key} = {val}")
        return "\n".join(lines) + "\n"

    # -- factories --------------------------------------------------------------

    def make_mesh(self):
        from .mesh import build_annular_mesh

        return build_annular_mesh(
            self.dimension, self.inner_radius, self.outer_radius, self.resolution
        )

    def make_material(self):
        from .material import make_material

        return make_material(
            self.material_kind, self.material_lambda, self.material_mu,
            self.material_gamma0,
        )

    def make_initial_data(self):
        from .initial_data import InitialData

        return InitialData(
            self.init_mode, self.init_amplitude, self.inner_radius,
            self.outer_radius, self.seed,
        )

    def coupling_config(self, **overrides):
        from .coupling import CouplingConfig

        kw = dict(
            gamma=self.gamma, dt=self.dt, t_end=self.t_end,
            newton_tol=self.newton_tol, newton_maxit=self.newton_maxit,
            epsilon1=self.epsilon1, viscosity=self.viscosity,
            include_convection=self.include_convection, epsilon0=self.epsilon0,
            coupling_tol=self.coupling_tol, csv_path=self.output_csv,
            vtk_every=self.output_vtk_every,
        )
        kw.update(overrides)
        return CouplingConfig(**kw)


def parse_config(text):
    """Parse flat key=value text ('#' comments) into a validated RunConfig."""
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, parser, _, validator, doc = _KEYS[key]
        try:
            parsed = parser(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: key {key!r}: {exc}") from exc
        if validator is not None and not validator(parsed):
            raise ConfigError(
                f"line {lineno}: key {key!r} = {parsed!r} violates range ({doc})"
            )
        setattr(cfg, attr, parsed)
    if cfg.inner_radius >= cfg.outer_radius:
        raise ConfigError("inner_radius must be smaller than outer_radius")
    return cfg
