from dataclasses import dataclass

import numpy as np

DEFAULT_WAVE = 16.0 * np.pi
CASE_KINDS = ("div_free", "non_div_free")


@dataclass(frozen=True)
class ManufacturedCase:
    """
    Аналитическое решение и правая часть обобщённой задачи Стокса.

    div_free:     u = (sin kx sin ky, cos kx cos ky), div u = 0
    non_div_free: u = (sin 2kx sin ky, cos kx cos ky)
    p = sin(k (x - y)); f = u/tau - div(2 mu e(u)) - lambda mu grad div u (+ grad p).
    """

    kind: str = "div_free"
    k_wave: float = DEFAULT_WAVE
    mu: float = 1.0
    lam: float = 0.0
    tau: float = 1.0
    with_pressure: bool = True

    def fields(self):
        """(скорость, давление, правая часть) как функции (x, y)."""
        return self.velocity, self.pressure, self.forcing

    def velocity(self, x, y):
        k = self.k_wave
        first = np.sin(2.0 * k * x) if self.kind == "non_div_free" else np.sin(k * x)
        return np.stack([first * np.sin(k * y), np.cos(k * x) * np.cos(k * y)])

    def pressure(self, x, y):
        return np.sin(self.k_wave * (x - y))

    def divergence(self, x, y):
        k = self.k_wave
        if self.kind == "div_free":
            return np.zeros_like(np.asarray(x * y, dtype=float))
        return 2.0 * k * np.cos(2.0 * k * x) * np.sin(k * y) - k * np.cos(k * x) * np.sin(k * y)

    def forcing(self, x, y):
        k, mu = self.k_wave, self.mu
        u = self.velocity(x, y)
        if self.kind == "div_free":
            # -div(2 mu e(u)) = 2 mu k^2 u
            f = (1.0 / self.tau + 2.0 * mu * k * k) * u
        else:
            laplacian = np.stack([-5.0 * k * k * u[0], -2.0 * k * k * u[1]])
            grad_div = np.stack([
                -4.0 * k * k * np.sin(2.0 * k * x) * np.sin(k * y) + k * k * np.sin(k * x) * np.sin(k * y),
                2.0 * k * k * np.cos(2.0 * k * x) * np.cos(k * y) - k * k * np.cos(k * x) * np.cos(k * y),
            ])
            f = u / self.tau - mu * laplacian - mu * (1.0 + self.lam) * grad_div
        if self.with_pressure:
            dp = k * np.cos(k * (x - y))
            f = f + np.stack([dp, -dp])
        return f


def manufactured_case(kind: str = "div_free", k_wave: float = DEFAULT_WAVE, mu: float = 1.0, lam: float = 0.0,
                      tau: float = 1.0, with_pressure: bool = True) -> ManufacturedCase:
    if kind not in CASE_KINDS:
        raise ValueError(f"Unknown manufactured case {kind!r}, expected one of {CASE_KINDS}")
    if with_pressure and kind != "div_free":
        raise ValueError("A pressure-coupled case requires a divergence-free velocity")
    return ManufacturedCase(kind=kind, k_wave=float(k_wave), mu=float(mu), lam=float(lam), tau=float(tau),
                            with_pressure=with_pressure)
