"""Far-field field-response model and channel assembly.

Each channel is ``(receive response)^H  Sigma  (transmit response)`` with a
diagonal path matrix Sigma. The UE has a single fixed antenna and all-ones
receive response. ARIS elements sit on a uniform planar array with half
wavelength spacing, centred on the surface reference point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .scenario import ScenarioConfig, ScenarioDraw


def propagation_difference(pos, theta, phi) -> np.ndarray:
    """Path difference ``x sin(theta) cos(phi) + y cos(theta)`` per path.

    ``pos`` may be a single 2-vector or a (K, 2) array; the result has shape
    (L,) or (L, K) respectively.
    """
    pos = np.asarray(pos, dtype=float)
    px = np.sin(theta) * np.cos(phi)
    py = np.cos(theta)
    if pos.ndim == 1:
        return px * pos[0] + py * pos[1]
    return np.outer(px, pos[:, 0]) + np.outer(py, pos[:, 1])


def field_response_tx(pos, theta, phi, wavelength: float) -> np.ndarray:
    """Field response vector of one antenna at ``pos`` (unit-modulus entries)."""
    return np.exp(1j * (2 * np.pi / wavelength) * propagation_difference(pos, theta, phi))


def field_response_matrix(positions, theta, phi, wavelength: float) -> np.ndarray:
    """Stack of field responses, shape (L, K), one column per position."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float)).reshape(-1, 2)
    return np.exp(1j * (2 * np.pi / wavelength) * propagation_difference(positions, theta, phi))


def grid_positions(count: int, spacing: float, cols: int | None = None) -> np.ndarray:
    """First ``count`` points (row-major) of a centred rectangular lattice."""
    if count == 0:
        return np.zeros((0, 2))
    cols = cols or math.ceil(math.sqrt(count))
    rows = math.ceil(count / cols)
    xs = (np.arange(cols) - (cols - 1) / 2.0) * spacing
    ys = (np.arange(rows) - (rows - 1) / 2.0) * spacing
    pts = [(x, y) for y in ys for x in xs]
    return np.array(pts[:count], dtype=float)


def aris_element_positions(m: int, wavelength: float) -> np.ndarray:
    return grid_positions(m, wavelength / 2.0)


@dataclass(frozen=True)
class AntennaLayout:
    """FA positions ``t_bar`` (N, 2) and fixed ARIS element positions ``r_bar`` (M, 2)."""

    t_bar: np.ndarray
    r_bar: np.ndarray

    @property
    def n(self) -> int:
        return self.t_bar.shape[0]

    @property
    def m(self) -> int:
        return self.r_bar.shape[0]

    def with_position(self, n: int, t) -> "AntennaLayout":
        t_bar = self.t_bar.copy()
        t_bar[n] = t
        return AntennaLayout(t_bar, self.r_bar)


@dataclass(frozen=True)
class Channels:
    """``h_br`` (M, N), ``h_ru`` (M,) and ``h_bu`` (N,) complex channels.

    The row vectors h_RU and h_BU are stored as 1-D arrays.
    """

    h_br: np.ndarray
    h_ru: np.ndarray
    h_bu: np.ndarray

    @property
    def n(self) -> int:
        return self.h_bu.shape[0]

    @property
    def m(self) -> int:
        return self.h_ru.shape[0]


def default_layout(cfg: ScenarioConfig, t_bar=None, m: int | None = None) -> AntennaLayout:
    m = cfg.m_elements if m is None else m
    if t_bar is None:
        t_bar = grid_positions(cfg.n_antennas, max(cfg.wavelength / 2.0, cfg.min_dist))
    return AntennaLayout(np.asarray(t_bar, dtype=float), aris_element_positions(m, cfg.wavelength))


def tx_response(draw: ScenarioDraw, link: str, positions, wavelength: float) -> np.ndarray:
    a = draw.angles[link]
    return field_response_matrix(positions, a.theta_t, a.phi_t, wavelength)


def rx_response_br(draw: ScenarioDraw, r_bar, wavelength: float) -> np.ndarray:
    a = draw.angles["br"]
    return field_response_matrix(r_bar, a.theta_r, a.phi_r, wavelength)


def assemble_channels(draw: ScenarioDraw, layout: AntennaLayout, cfg: ScenarioConfig) -> Channels:
    """Build H_BR = F^H Sigma_BR Ups_BR, h_RU = 1^H Sigma_RU Ups_RU, h_BU = 1^H Sigma_BU Ups_BU."""
    L = draw.n_paths
    for link in ("br", "ru", "bu"):
        if draw.sigma(link).shape != (L,):
            raise DimensionError(f"sigma_{link} must have shape ({L},)")
    if layout.t_bar.ndim != 2 or layout.t_bar.shape[1] != 2:
        raise DimensionError("t_bar must have shape (N, 2)")
    if layout.r_bar.ndim != 2 or layout.r_bar.shape[1] != 2:
        raise DimensionError("r_bar must have shape (M, 2)")
    lam = cfg.wavelength
    ups_br = tx_response(draw, "br", layout.t_bar, lam)
    ups_bu = tx_response(draw, "bu", layout.t_bar, lam)
    ups_ru = tx_response(draw, "ru", layout.r_bar, lam)
    f_br = rx_response_br(draw, layout.r_bar, lam)
    h_br = f_br.conj().T @ (draw.sigma_br[:, None] * ups_br)
    h_ru = draw.sigma_ru @ ups_ru
    h_bu = draw.sigma_bu @ ups_bu
    return Channels(h_br, h_ru, h_bu)
