"""Independent high-precision oracles for the formula and gradient checks.

These are deliberately separate code paths from the package: mpmath at 50
digits for the closed-form physics, an explicit per-neuron loop for the
network forward pass, and central finite differences for gradients. The
package is never imported here.
"""

from __future__ import annotations

import math

import mpmath as mp
import numpy as np

mp.mp.dps = 50


def channel_gain_hp(q_u, q_m, H, f_c, c, h, l, eta_los, eta_nlos) -> float:
    dx = mp.mpf(q_m[0]) - mp.mpf(q_u[0])
    dy = mp.mpf(q_m[1]) - mp.mpf(q_u[1])
    d_h = mp.sqrt(dx * dx + dy * dy)
    d3 = mp.sqrt(d_h * d_h + mp.mpf(H) ** 2)
    if d_h == 0:
        angle = mp.pi / 2
    else:
        angle = mp.atan(mp.mpf(H) / d_h)
    angle_deg = angle * 180 / mp.pi
    p_los = 1 / (1 + mp.mpf(h) * mp.exp(-mp.mpf(l) * (angle_deg - mp.mpf(h))))
    loss = (20 * mp.log10(4 * mp.pi * mp.mpf(f_c) * d3 / mp.mpf(c))
            + p_los * mp.mpf(eta_los) + (1 - p_los) * mp.mpf(eta_nlos))
    return float(mp.power(10, -loss / 10))


def offload_bits_hp(t_share, p, gain, T, N, delta, B, sigma2) -> float:
    snr = mp.mpf(p) * mp.mpf(gain) / mp.mpf(sigma2)
    rate = mp.mpf(B) * mp.log(1 + snr, 2)
    return float(mp.mpf(T) / (mp.mpf(N) * mp.mpf(delta)) * mp.mpf(t_share) * rate)


def local_bits_hp(f, T, N, C) -> float:
    return float(mp.mpf(T) * mp.mpf(f) / (mp.mpf(N) * mp.mpf(C)))


def harvested_energy_hp(gain, eta0, T, N, P_e) -> float:
    return float(mp.mpf(eta0) * mp.mpf(T) / mp.mpf(N) * mp.mpf(gain) * mp.mpf(P_e))


def fairness_index_hp(totals) -> float:
    vals = [mp.mpf(float(x)) for x in totals]
    sq = sum(v * v for v in vals)
    if sq == 0:
        return 1.0
    s = sum(vals)
    return float(s * s / (len(vals) * sq))


def arrival_reward_hp(pos, q_d, A1, A2, sparse, radius) -> float:
    dx = mp.mpf(pos[0]) - mp.mpf(q_d[0])
    dy = mp.mpf(pos[1]) - mp.mpf(q_d[1])
    dist = mp.sqrt(dx * dx + dy * dy)
    if sparse:
        return float(A1) if dist <= radius else 0.0
    return float(mp.mpf(A1) - mp.mpf(A2) * dist)


def mlp_forward_oracle(weights, biases, x) -> np.ndarray:
    """Per-neuron loop evaluation of a ReLU MLP (independent of the package)."""
    a = np.asarray(x, dtype=float)
    last = len(weights) - 1
    for li, (w, b) in enumerate(zip(weights, biases)):
        out = np.empty((a.shape[0], w.shape[1]))
        for j in range(w.shape[1]):
            acc = np.full(a.shape[0], b[j])
            for i in range(w.shape[0]):
                acc = acc + a[:, i] * w[i, j]
            out[:, j] = acc
        a = out if li == last else np.where(out > 0.0, out, 0.0)
    return a


def finite_diff_grads(loss_fn, arrays, step=1e-6):
    """Central finite differences of a scalar function over a list of arrays.

    ``loss_fn`` must be deterministic and read the arrays in place.
    """
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_fn()
            flat[i] = orig - step
            down = loss_fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * step)
        grads.append(g)
    return grads


def grad_rel_error(analytic, numeric) -> float:
    """Norm-ratio distance between two gradient stacks."""
    a = np.concatenate([np.ravel(g) for g in analytic])
    n = np.concatenate([np.ravel(g) for g in numeric])
    denom = max(float(np.linalg.norm(n)), 1e-12)
    return float(np.linalg.norm(a - n)) / denom


def trapezoid_integral(fn, lo, hi, n_points) -> float:
    xs = np.linspace(lo, hi, n_points)
    ys = fn(xs)
    return float(np.trapezoid(ys, xs))


def squash_warped_grid(lo, hi, n_points, u_span=12.0) -> np.ndarray:
    """Action-space grid warped like tanh, dense where a squashed density spikes.

    Uniform action grids cannot resolve the integrable spike a squashed
    Gaussian develops near its bounds; a tanh-warped grid concentrates
    points there while trapezoid integration stays over plain x spacing.
    """
    u = np.linspace(-u_span, u_span, n_points)
    return lo + 0.5 * (np.tanh(u) + 1.0) * (hi - lo)


def straight_line_positions(q_s, q_d, N):
    """Analytic per-slot positions for constant-speed straight flight."""
    q_s = np.asarray(q_s, dtype=float)
    q_d = np.asarray(q_d, dtype=float)
    return [q_s + (n / N) * (q_d - q_s) for n in range(N + 1)]


def hfh_schedule_oracle(N, M, reserve):
    """Expected follow index per slot for a constant reserve, None = to destination."""
    span = max(1, (N - reserve) // M)
    out = []
    for n in range(1, N + 1):
        if N - n + 1 <= reserve:
            out.append(None)
        else:
            out.append(min((n - 1) // span, M - 1))
    return out


def greedy_local_f_oracle(e, N, T, zeta_c, f_max) -> float:
    return float(min(f_max, (e * N / (T * zeta_c)) ** (1.0 / 3.0)))


def greedy_offload_p_oracle(e, N, T, t, p_max) -> float:
    return float(min(p_max, e * N / (T * t)))
