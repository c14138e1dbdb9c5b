"""Numba kernels for the Euler-Maruyama integrators.

Every kernel draws its Gaussian increments from a numpy ``Generator`` passed
in by the caller (numba reproduces numpy's stream bit for bit), accumulates
the log-growth of a tangent vector and returns

    (log_growth, reflections, status)

where ``status`` is 0 on success and 1 if the state became non-finite.
Log-growth is only accumulated after ``n_burn`` steps.  Tangent vectors are
renormalised every ``renorm`` steps; this is exact bookkeeping because the
tangent dynamics is linear.
"""

import math

import numpy as np
from numba import njit

_OK = 0
_BLOWUP = 1


@njit(cache=True, nogil=True)
def cartesian(rng, mu, omega, a, b, sigma, dt, n_burn, n_steps, renorm, x0):
    x, y = x0, 0.0
    u, v = 1.0, 0.0
    sq = sigma * math.sqrt(dt)
    total = 0.0
    n_all = n_burn + n_steps
    for i in range(n_all):
        r2 = x * x + y * y
        # linearisation: (mu - a r2) I + (omega + b r2) J + 2 <X,U> [[-a,-b],[b,-a]] X
        c = mu - a * r2
        w = omega + b * r2
        xu = 2.0 * (x * u + y * v)
        du = c * u - w * v + xu * (-a * x - b * y)
        dv = w * u + c * v + xu * (b * x - a * y)
        dx = c * x - w * y
        dy = w * x + c * y
        z1 = rng.standard_normal()
        z2 = rng.standard_normal()
        u += du * dt
        v += dv * dt
        x += dx * dt + sq * z1
        y += dy * dt + sq * z2
        if (i + 1) % renorm == 0 or i + 1 == n_burn or i + 1 == n_all:
            nrm = math.sqrt(u * u + v * v)
            if not (nrm > 0.0 and nrm < math.inf) or not math.isfinite(x + y):
                return total, 0, _BLOWUP
            if i + 1 > n_burn:
                total += math.log(nrm)
            u /= nrm
            v /= nrm
    return total, 0, _OK


@njit(cache=True, nogil=True)
def polar(rng, mu, a, b, sigma, dt, n_burn, n_steps, r0, psi0, r_floor):
    r, psi = r0, psi0
    sdt = math.sqrt(dt)
    s2 = 0.5 * sigma * sigma
    total = 0.0
    refl = 0
    n_all = n_burn + n_steps
    for i in range(n_all):
        r2 = r * r
        s, c = math.sin(2.0 * psi), math.cos(2.0 * psi)
        if i >= n_burn:
            total += (mu - 2.0 * a * r2 + r2 * (b * s - a * c)) * dt
        zr = rng.standard_normal()
        zp = rng.standard_normal()
        dpsi = r2 * (b * (1.0 + c) + a * s) * dt - sigma / r * sdt * zp
        r += (mu * r - a * r2 * r + s2 / r) * dt + sigma * sdt * zr
        psi += dpsi
        if r < r_floor:
            r = 2.0 * r_floor - r
            refl += 1
        if psi >= math.pi or psi < 0.0:
            psi -= math.pi * math.floor(psi / math.pi)
        if not math.isfinite(r + psi):
            return total, refl, _BLOWUP
    return total, refl, _OK


@njit(cache=True, nogil=True)
def frame(rng, mu, a, b, sigma, dt, n_burn, n_steps, renorm, r0, r_floor):
    # Drift is the Stratonovich one, [[mu - 3a r^2, 0], [2b r^2, mu - a r^2]];
    # the (sigma/r) rotation noise is applied as an exact rotation, which
    # absorbs the -sigma^2/(2r^2) Ito correction.  A plain Euler step of the
    # rotation is biased near r = 0, where sigma/r blows up.
    r = r0
    v1, v2 = 0.0, 1.0
    sdt = math.sqrt(dt)
    s2 = 0.5 * sigma * sigma
    total = 0.0
    refl = 0
    n_all = n_burn + n_steps
    for i in range(n_all):
        r2 = r * r
        zr = rng.standard_normal()
        zp = rng.standard_normal()
        n1 = v1 + (mu - 3.0 * a * r2) * v1 * dt
        n2 = v2 + (2.0 * b * r2 * v1 + (mu - a * r2) * v2) * dt
        k = sigma / r * sdt * zp
        c, s = math.cos(k), math.sin(k)
        v1 = c * n1 + s * n2
        v2 = c * n2 - s * n1
        r += (mu * r - a * r2 * r + s2 / r) * dt + sigma * sdt * zr
        if r < r_floor:
            r = 2.0 * r_floor - r
            refl += 1
        if (i + 1) % renorm == 0 or i + 1 == n_burn or i + 1 == n_all:
            nrm = math.sqrt(v1 * v1 + v2 * v2)
            if not (nrm > 0.0 and nrm < math.inf) or not math.isfinite(r):
                return total, refl, _BLOWUP
            if i + 1 > n_burn:
                total += math.log(nrm)
            v1 /= nrm
            v2 /= nrm
    return total, refl, _OK


@njit(cache=True, nogil=True)
def frame_euler(rng, mu, a, b, sigma, dt, n_burn, n_steps, renorm, r0, r_floor):
    """Plain Euler-Maruyama on the Ito form (kept for the bias comparison)."""
    r = r0
    v1, v2 = 0.0, 1.0
    sdt = math.sqrt(dt)
    s2 = 0.5 * sigma * sigma
    total = 0.0
    refl = 0
    n_all = n_burn + n_steps
    for i in range(n_all):
        r2 = r * r
        ito = s2 / r2
        zr = rng.standard_normal()
        zp = rng.standard_normal()
        k = sigma / r * sdt * zp
        n1 = v1 + (mu - 3.0 * a * r2 - ito) * v1 * dt + k * v2
        n2 = v2 + (2.0 * b * r2 * v1 + (mu - a * r2 - ito) * v2) * dt - k * v1
        v1, v2 = n1, n2
        r += (mu * r - a * r2 * r + s2 / r) * dt + sigma * sdt * zr
        if r < r_floor:
            r = 2.0 * r_floor - r
            refl += 1
        if (i + 1) % renorm == 0 or i + 1 == n_burn or i + 1 == n_all:
            nrm = math.sqrt(v1 * v1 + v2 * v2)
            if not (nrm > 0.0 and nrm < math.inf) or not math.isfinite(r):
                return total, refl, _BLOWUP
            if i + 1 > n_burn:
                total += math.log(nrm)
            v1 /= nrm
            v2 /= nrm
    return total, refl, _OK


@njit(cache=True, nogil=True)
def linear2d(rng, drift, noise, dt, n_burn, n_steps, renorm):
    y1, y2 = 1.0, 1.0
    nrm0 = math.sqrt(2.0)
    y1 /= nrm0
    y2 /= nrm0
    sdt = math.sqrt(dt)
    a11, a12, a21, a22 = drift[0, 0], drift[0, 1], drift[1, 0], drift[1, 1]
    b11, b12, b21, b22 = noise[0, 0], noise[0, 1], noise[1, 0], noise[1, 1]
    total = 0.0
    n_all = n_burn + n_steps
    for i in range(n_all):
        dw = sdt * rng.standard_normal()
        n1 = y1 + (a11 * y1 + a12 * y2) * dt + (b11 * y1 + b12 * y2) * dw
        n2 = y2 + (a21 * y1 + a22 * y2) * dt + (b21 * y1 + b22 * y2) * dw
        y1, y2 = n1, n2
        if (i + 1) % renorm == 0 or i + 1 == n_burn or i + 1 == n_all:
            nrm = math.sqrt(y1 * y1 + y2 * y2)
            if not (nrm > 0.0 and nrm < math.inf):
                return total, 0, _BLOWUP
            if i + 1 > n_burn:
                total += math.log(nrm)
            y1 /= nrm
            y2 /= nrm
    return total, 0, _OK


@njit(cache=True, nogil=True)
def polar_radius_path(rng, mu, a, sigma, dt, n_burn, n_samples, thin, r0, r_floor):
    """Radius samples from the same r-update as ``polar`` (every ``thin`` steps)."""
    r = r0
    sdt = math.sqrt(dt)
    s2 = 0.5 * sigma * sigma
    out = np.empty(n_samples)
    k = 0
    n_all = n_burn + n_samples * thin
    for i in range(n_all):
        zr = rng.standard_normal()
        rng.standard_normal()  # keep the stream aligned with ``polar``
        r += (mu * r - a * r * r * r + s2 / r) * dt + sigma * sdt * zr
        if r < r_floor:
            r = 2.0 * r_floor - r
        if i >= n_burn and (i - n_burn + 1) % thin == 0:
            out[k] = r
            k += 1
    return out
