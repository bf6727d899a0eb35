"""Problem configuration: a single JSON document describing one solve.

Top-level keys
--------------
n, M : int
    Dimension and truncation radius.
tensor : object
    ``{"isotropic": {"lambda": .., "mu": ..}}``, ``{"n": .., "entries": [..]}``,
    ``{"file": "tensor.json"}`` (relative to the config file) or
    ``{"random": {"seed": ..}}``.
forcing : object
    ``{"modes": [{"xi": [..], "value": [[re, im], ..]}]}``,
    ``{"random": {"seed": .., "decay": .., "amplitude": ..}}`` or
    ``{"preset": "taylor-green" | "single-mode" | "random-decay", ...}``.
    An optional ``"scale"`` multiplies the result.
g : object, optional
    Scalar divergence data, ``modes`` (value ``[re, im]``) or ``random``.
wind : object
    Oseen wind, same forms as ``forcing`` without presets; random winds are
    Leray-projected.
solver, tol, max_iter, s, damping, seed : scalars
study : {"M": [..]}; galerkin : {"M": ..} or {"modes": [..]};
audit : {"checks": [..], "trials": .., "n": .., "M": ..}

Presets
-------
taylor-green (n = 2)
    u* = (sin 2pi x1 cos 2pi x2, -cos 2pi x1 sin 2pi x2),
    p* = (cos 4pi x1 + cos 4pi x2) / 4 and f = -L u* + grad p* + (u* . grad) u*
    evaluated with the configured tensor (8 pi^2 u* for the isotropic (0, 1)).
single-mode
    f = c exp(2 pi i xi.x) + conj, with ``xi`` (default (1, 0, ..)) and ``value``
    (default the unit vector e_2).
random-decay
    coefficients rho(xi)^(-decay) times random unit phases, seeded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from .errors import ConfigError, TorusflowError
from .field import from_modes, leray_project, random_field
from .viscosity import ellipticity_constant, load_tensor, random_elliptic

SOLVERS = ("stokes", "oseen", "ns-picard", "galerkin")
DEFAULTS = {"tol": 1e-10, "max_iter": 500, "s": 1.0, "damping": 1.0, "seed": 0,
            "solver": "stokes"}


@dataclass
class ProblemConfig:
    raw: dict
    base_dir: Path = dc_field(default_factory=Path.cwd)

    def get(self, key, default=None):
        return self.raw.get(key, DEFAULTS.get(key, default))

    def require(self, key):
        if key not in self.raw:
            raise ConfigError(f"missing key '{key}'")
        return self.raw[key]

    @property
    def n(self):
        return _int(self.require("n"), "n", minimum=2)

    @property
    def M(self):
        return _int(self.require("M"), "M", minimum=1)

    @property
    def seed(self):
        return _int(self.get("seed"), "seed", minimum=0)

    @property
    def tol(self):
        tol = _float(self.get("tol"), "tol")
        if not tol > 0:
            raise ConfigError("key 'tol' must be positive")
        return tol

    @property
    def max_iter(self):
        return _int(self.get("max_iter"), "max_iter", minimum=1)

    @property
    def s(self):
        return _float(self.get("s"), "s")

    @property
    def damping(self):
        d = _float(self.get("damping"), "damping")
        if not 0 < d <= 1:
            raise ConfigError("key 'damping' must lie in (0, 1]")
        return d


def _int(v, key, minimum=None):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(f"key '{key}' must be an integer, got {v!r}")
    v = int(v)
    if minimum is not None and v < minimum:
        raise ConfigError(f"key '{key}' must be at least {minimum}, got {v}")
    return v


def _float(v, key):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"key '{key}' must be a number, got {v!r}")
    return float(v)


def parse_config(text, base_dir=None, source="<config>"):
    """Parse JSON text; syntax errors report the line and column."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    return ProblemConfig(raw, Path(base_dir) if base_dir else Path.cwd())


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path.parent, str(path))


def apply_overrides(cfg, **flags):
    """CLI flags replace top-level scalar keys when given."""
    for key, val in flags.items():
        if val is not None:
            cfg.raw[key] = val
    return cfg


# -- builders ------------------------------------------------------------------
def build_tensor(cfg):
    spec = cfg.require("tensor")
    n = cfg.n
    if not isinstance(spec, dict):
        raise ConfigError("key 'tensor' must be an object")
    try:
        if "file" in spec:
            path = cfg.base_dir / spec["file"]
            try:
                text = path.read_text()
            except OSError as exc:
                raise ConfigError(f"tensor file {path}: {exc.strerror}") from None
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(
                    f"tensor file {path}: line {exc.lineno} column {exc.colno}: {exc.msg}"
                ) from None
            A = _load_tensor_named(data, n, f"tensor file {path}")
        elif "random" in spec:
            A = random_elliptic(_int(spec["random"].get("seed", cfg.seed), "tensor.random.seed"), n)
        else:
            A = _load_tensor_named(spec, n, "tensor")
    except TorusflowError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"tensor: {exc}") from None
    if A.dim != n:
        raise ConfigError(f"tensor dimension {A.dim} differs from n={n}")
    try:
        ellipticity_constant(A)
    except TorusflowError as exc:
        raise ConfigError(f"tensor: {exc}") from None
    return A


def _load_tensor_named(data, n, where):
    try:
        return load_tensor(data, n)
    except KeyError as exc:
        raise ConfigError(f"{where}: missing key '{exc.args[0]}'") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _complex(v, key):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(_float(v[0], key), _float(v[1], key))
    raise ConfigError(f"key '{key}' must be a number or [re, im], got {v!r}")


def _modes(spec, n, M, kind, key):
    modes = {}
    if not isinstance(spec, list):
        raise ConfigError(f"key '{key}' must be a list")
    for i, entry in enumerate(spec):
        k = f"{key}[{i}]"
        if not isinstance(entry, dict) or "xi" not in entry or "value" not in entry:
            raise ConfigError(f"entry '{k}' needs keys 'xi' and 'value'")
        xi = entry["xi"]
        if not isinstance(xi, list) or len(xi) != n:
            raise ConfigError(f"key '{k}.xi' must list {n} integers")
        xi = tuple(_int(x, f"{k}.xi") for x in xi)
        if max(abs(x) for x in xi) > M:
            raise ConfigError(f"key '{k}.xi' lies outside the truncation box M={M}")
        if kind == "vector":
            val = entry["value"]
            if not isinstance(val, list) or len(val) != n:
                raise ConfigError(f"key '{k}.value' must list {n} components")
            modes[xi] = [_complex(c, f"{k}.value") for c in val]
        else:
            modes[xi] = _complex(entry["value"], f"{k}.value")
    try:
        return from_modes(n, M, modes, kind=kind)
    except TorusflowError as exc:
        raise ConfigError(f"key '{key}': {exc}") from None


def _random(spec, cfg, n, M, kind, key, seed_offset):
    if not isinstance(spec, dict):
        raise ConfigError(f"key '{key}.random' must be an object")
    seed = _int(spec.get("seed", cfg.seed + seed_offset), f"{key}.random.seed", minimum=0)
    decay = _float(spec.get("decay", 2.0), f"{key}.random.decay")
    amp = _float(spec.get("amplitude", 1.0), f"{key}.random.amplitude")
    return random_field(seed, decay, M, n, kind=kind, amplitude=amp)


def build_vector(cfg, key, M=None, presets=True, seed_offset=0):
    """Vector data (forcing or wind) built on the config box, truncated to ``M``.

    Building on the config box first keeps random data identical across
    the truncations of a study.
    """
    spec = cfg.require(key)
    n = cfg.n
    M_out, M = M, cfg.M
    if not isinstance(spec, dict):
        raise ConfigError(f"key '{key}' must be an object")
    extra = None
    if "modes" in spec:
        v = _modes(spec["modes"], n, M, "vector", f"{key}.modes")
    elif "random" in spec:
        v = _random(spec["random"], cfg, n, M, "vector", key, seed_offset)
    elif presets and "preset" in spec:
        v, extra = _preset(cfg, spec, M)
    else:
        raise ConfigError(f"key '{key}' needs one of 'modes', 'random'"
                          + (" or 'preset'" if presets else ""))
    if "scale" in spec:
        v = v * _float(spec["scale"], f"{key}.scale")
    if M_out is not None:
        v = v.resized(M_out)
        if extra is not None:
            extra = {k: x.resized(M_out) for k, x in extra.items()}
    return v, extra


def _preset(cfg, spec, M):
    from .navier_stokes import manufactured_forcing, taylor_green

    name = spec["preset"]
    n = cfg.n
    if name == "taylor-green":
        if n != 2:
            raise ConfigError("preset 'taylor-green' needs n = 2")
        if M < 2:
            raise ConfigError("preset 'taylor-green' needs M >= 2")
        u, p = taylor_green(M)
        return manufactured_forcing(build_tensor(cfg), u, p), {"u_exact": u, "p_exact": p}
    if name == "single-mode":
        xi = spec.get("xi", [1] + [0] * (n - 1))
        default = [0.0] * n
        default[1] = 1.0
        value = spec.get("value", default)
        return _modes([{"xi": xi, "value": value}], n, M, "vector", "forcing"), None
    if name == "random-decay":
        sub = {k: spec[k] for k in ("seed", "decay", "amplitude") if k in spec}
        return _random(sub, cfg, n, M, "vector", "forcing", 0), None
    raise ConfigError(f"key 'forcing.preset': unknown preset {name!r}")


def build_g(cfg, M=None):
    if "g" not in cfg.raw or cfg.raw["g"] is None:
        return None
    spec = cfg.raw["g"]
    n = cfg.n
    M_out, M = M, cfg.M
    if not isinstance(spec, dict):
        raise ConfigError("key 'g' must be an object")
    if "modes" in spec:
        g = _modes(spec["modes"], n, M, "scalar", "g.modes")
    elif "random" in spec:
        g = _random(spec["random"], cfg, n, M, "scalar", "g", 1)
    else:
        raise ConfigError("key 'g' needs 'modes' or 'random'")
    if "scale" in spec:
        g = g * _float(spec["scale"], "g.scale")
    return g if M_out is None else g.resized(M_out)


def build_wind(cfg, M=None):
    U, _ = build_vector(cfg, "wind", M=M, presets=False, seed_offset=2)
    if "random" in cfg.raw["wind"]:
        U = leray_project(U)
    return U


def solver_name(cfg):
    name = cfg.get("solver")
    if name not in SOLVERS:
        raise ConfigError(f"key 'solver' must be one of {', '.join(SOLVERS)}, got {name!r}")
    return name


def m_list(cfg):
    study = cfg.raw.get("study")
    if not isinstance(study, dict) or "M" not in study:
        raise ConfigError("missing key 'study.M'")
    Ms = study["M"]
    if not isinstance(Ms, list) or not Ms:
        raise ConfigError("key 'study.M' must be a non-empty list")
    return [_int(m, "study.M", minimum=1) for m in Ms]
