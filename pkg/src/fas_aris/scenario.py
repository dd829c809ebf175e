"""Scenario configuration, unit conversions and random channel realizations.

All dB/dBm quantities are converted to linear units once, when the config is
constructed; everything downstream works in watts and linear gains.

Random numbers come from numpy's counter-based Philox generator seeded through
a ``SeedSequence([seed, stream])``. The stream id separates independent uses
of the same trial seed (scenario draw, ARIS phase initialization, ...), so
e.g. the random-phase baseline never perturbs the channel draw.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ConfigError

RNG_ALGORITHM = "numpy.random.Philox(4x64-10) seeded by SeedSequence([seed, stream])"

# stream ids for rng_for()
STREAM_SCENARIO = 0
STREAM_ARIS_INIT = 1
STREAM_RANDOM_PHASE = 2
STREAM_PASSIVE_INIT = 3

LINKS = ("br", "ru", "bu")


def rng_for(seed: int, stream: int = STREAM_SCENARIO) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


def convert_dbm(p_dbm: float) -> float:
    """Power in dBm to watts."""
    return 10.0 ** (p_dbm / 10.0) * 1e-3


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


_VECTOR_FIELDS = ("bs_pos", "aris_pos", "ue_pos")


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical and algorithmic parameters of one FAS-ARIS downlink setup.

    Defaults reproduce the reference setup: BS at the origin, ARIS at
    (30, 0, 5) m, UE at (70, 10, 0) m, 1.2 GHz carrier, N = M = 4, L = 5.
    """

    n_antennas: int = 4
    m_elements: int = 4
    n_paths: int = 5
    wavelength: float = 0.25
    bs_pos: tuple[float, float, float] = (0.0, 0.0, 0.0)
    aris_pos: tuple[float, float, float] = (30.0, 0.0, 5.0)
    ue_pos: tuple[float, float, float] = (70.0, 10.0, 0.0)
    p0_dbm: float = 20.0
    p1_dbm: float = 10.0
    sigma_r_dbm: float = -70.0
    sigma_u_dbm: float = -70.0
    k0_db: float = -30.0
    d0: float = 1.0
    alpha_br: float = 2.2
    alpha_ru: float = 3.0
    alpha_bu: float = 3.0
    rician_iota: float = 0.5
    min_dist: float = 0.125  # D = lambda / 2
    region_half: float = 0.5  # A / 2 with A = 4 lambda
    eps1: float = 1e-5
    eps2: float = 1e-5
    eps3: float = 1e-4
    max_outer_iters: int = 50
    max_inner_iters: int = 30
    max_srcr_iters: int = 40
    srcr_eps0: float = 0.1
    # position steps first try curvature kappa / 2^j, j = levels..0 (0: closed-form bound only)
    mm_backtrack_levels: int = 8
    passive_pc_dbm: float = -10.0
    passive_pdc_dbm: float = -5.0

    # linear-unit copies, filled in __post_init__
    p0: float = field(init=False, repr=False, compare=False)
    p1: float = field(init=False, repr=False, compare=False)
    sigma_r2: float = field(init=False, repr=False, compare=False)
    sigma_u2: float = field(init=False, repr=False, compare=False)
    k0: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in _VECTOR_FIELDS:
            v = tuple(float(x) for x in getattr(self, name))
            if len(v) != 3:
                raise ConfigError(f"{name} must be a 3-vector, got {v!r}")
            object.__setattr__(self, name, v)
        self._validate()
        object.__setattr__(self, "p0", convert_dbm(self.p0_dbm))
        object.__setattr__(self, "p1", convert_dbm(self.p1_dbm))
        object.__setattr__(self, "sigma_r2", convert_dbm(self.sigma_r_dbm))
        object.__setattr__(self, "sigma_u2", convert_dbm(self.sigma_u_dbm))
        object.__setattr__(self, "k0", db_to_linear(self.k0_db))

    def _validate(self):
        if int(self.n_antennas) != self.n_antennas or self.n_antennas < 1:
            raise ConfigError("n_antennas must be an integer >= 1")
        # M = 0 is accepted as the "no surface" ablation
        if int(self.m_elements) != self.m_elements or self.m_elements < 0:
            raise ConfigError("m_elements must be an integer >= 0")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ConfigError("n_paths must be an integer >= 1")
        for name in ("wavelength", "d0", "min_dist", "region_half", "eps1", "eps2", "eps3"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        for name in ("p0_dbm", "p1_dbm", "sigma_r_dbm", "sigma_u_dbm", "k0_db",
                     "passive_pc_dbm", "passive_pdc_dbm", "alpha_br", "alpha_ru", "alpha_bu"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if not self.rician_iota >= 0:
            raise ConfigError("rician_iota must be >= 0")
        if int(self.mm_backtrack_levels) != self.mm_backtrack_levels or self.mm_backtrack_levels < 0:
            raise ConfigError("mm_backtrack_levels must be an integer >= 0")
        if not 0 < self.srcr_eps0 <= 1:
            raise ConfigError("srcr_eps0 must lie in (0, 1]")
        for name in ("max_outer_iters", "max_inner_iters", "max_srcr_iters"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 1:
                raise ConfigError(f"{name} must be an integer >= 1")
        cols = math.ceil(math.sqrt(self.n_antennas))
        region = 2.0 * self.region_half
        if region < self.min_dist * (cols - 1) * math.sqrt(2.0) * (1 - 1e-12):
            raise ConfigError(
                f"movable region A={region:g} m too small for N={self.n_antennas} "
                f"antennas at minimum spacing D={self.min_dist:g} m")

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    @property
    def region_side(self) -> float:
        return 2.0 * self.region_half

    def distance(self, link: str) -> float:
        a, b = {"br": (self.bs_pos, self.aris_pos),
                "ru": (self.aris_pos, self.ue_pos),
                "bu": (self.bs_pos, self.ue_pos)}[link]
        return float(np.linalg.norm(np.subtract(b, a)))

    def exponent(self, link: str) -> float:
        return {"br": self.alpha_br, "ru": self.alpha_ru, "bu": self.alpha_bu}[link]

    def link_path_loss(self, link: str) -> float:
        return path_loss(self.distance(link), self.exponent(link), self)

    def to_mapping(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.init}


def path_loss(distance: float, exponent: float, cfg: ScenarioConfig) -> float:
    """Large-scale power gain ``K0 (d / d0)^-alpha`` in linear units."""
    if not distance > 0:
        raise ValueError(f"distance must be positive, got {distance!r}")
    return cfg.k0 * (distance / cfg.d0) ** (-exponent)


# ---------------------------------------------------------------------------
# config files


def _parse_value(name: str, raw: str, ftype):
    raw = raw.strip()
    try:
        if name in _VECTOR_FIELDS:
            parts = [p for p in raw.replace(",", " ").split() if p]
            return tuple(float(p) for p in parts)
        if ftype in (int, "int"):
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_key_values(text: str, source: str = "<string>") -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def config_from_mapping(values: Mapping[str, object], base: ScenarioConfig | None = None) -> ScenarioConfig:
    types = {f.name: f.type for f in dataclasses.fields(ScenarioConfig) if f.init}
    unknown = sorted(set(values) - set(types))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    parsed = {}
    for key, value in values.items():
        if isinstance(value, str):
            value = _parse_value(key, value, types[key])
        parsed[key] = value
    try:
        return (base or ScenarioConfig()).replace(**parsed)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return config_from_mapping(parse_key_values(text, str(path)))


def dump_config(cfg: ScenarioConfig) -> str:
    lines = []
    for key, value in cfg.to_mapping().items():
        if isinstance(value, tuple):
            value = ", ".join(repr(float(v)) for v in value)
        else:
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# random draws


@dataclass(frozen=True)
class LinkAngles:
    """Departure (t) and arrival (r) elevation/azimuth angles of one link, radians."""

    theta_t: np.ndarray
    phi_t: np.ndarray
    theta_r: np.ndarray
    phi_r: np.ndarray


@dataclass(frozen=True)
class ScenarioDraw:
    """One channel realization: per-link path angles and diagonal path gains.

    ``sigma_*`` hold the diagonals of the L x L path response matrices; for
    the BR and RU links entry 0 is the line-of-sight path.
    """

    angles: dict[str, LinkAngles]
    sigma_br: np.ndarray
    sigma_ru: np.ndarray
    sigma_bu: np.ndarray
    seed: int = -1

    @property
    def n_paths(self) -> int:
        return len(self.sigma_br)

    def sigma(self, link: str) -> np.ndarray:
        return {"br": self.sigma_br, "ru": self.sigma_ru, "bu": self.sigma_bu}[link]

    def digest(self) -> str:
        """Content hash, used to assert that schemes share a draw."""
        h = hashlib.sha256()
        for link in LINKS:
            a = self.angles[link]
            for arr in (a.theta_t, a.phi_t, a.theta_r, a.phi_r, self.sigma(link)):
                h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def path_variances(cfg: ScenarioConfig, link: str) -> np.ndarray:
    """Per-path variances of the diagonal path gains of ``link``."""
    L = cfg.n_paths
    pl = cfg.link_path_loss(link)
    if link == "bu":
        return np.full(L, pl / L)
    if L < 2:
        raise ConfigError("BR/RU links need n_paths >= 2 (one LoS plus NLoS paths)")
    iota = cfg.rician_iota
    var = np.full(L, pl / ((iota + 1.0) * (L - 1)))
    var[0] = pl * iota / (iota + 1.0)
    return var


def sample_scenario(cfg: ScenarioConfig, seed: int) -> ScenarioDraw:
    """Draw angles ~ U[0, pi] and complex Gaussian path gains.

    Consumption order (fixed, part of the reproducibility contract): for each
    link in (br, ru, bu) a (4, L) uniform block ``theta_t, phi_t, theta_r,
    phi_r``; then for each link in the same order L real parts followed by L
    imaginary parts of standard normals.
    """
    rng = rng_for(seed, STREAM_SCENARIO)
    L = cfg.n_paths
    angles = {}
    for link in LINKS:
        block = rng.uniform(0.0, np.pi, size=(4, L))
        angles[link] = LinkAngles(*block)
    gains = {}
    for link in LINKS:
        var = path_variances(cfg, link)
        z = rng.standard_normal(L) + 1j * rng.standard_normal(L)
        gains[link] = z * np.sqrt(var / 2.0)
    return ScenarioDraw(angles, gains["br"], gains["ru"], gains["bu"], seed=int(seed))
