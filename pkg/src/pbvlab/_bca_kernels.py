"""Hot inner loops of the binary-collision Monte Carlo.

Everything here must stay numba-njit compatible *and* valid as plain Python:
the :func:`pbvlab._accel.kernel` decorator compiles these functions when numba
is enabled and leaves them untouched otherwise. Only ``math`` scalar calls and
numpy array indexing are used so both paths produce bit-identical streams.

The RNG is splitmix64; each ion gets an independent stream derived from the
run seed and its index, which makes tallies independent of execution order.
"""

import math

import numpy as np

from ._accel import kernel

# splitmix64 constants (uint64 wrap-around arithmetic)
RNG_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53

# indices into the packed parameter vector
P_FLIGHT = 0        # free-flight length, nm
P_PMAX = 1          # maximum impact parameter, nm
P_ED = 2            # displacement energy, eV
P_A_ION = 3         # ion-target screening length, nm
P_EPSF_ION = 4      # reduced energy per eV, ion-target
P_LAM_ION = 5       # kinematic factor 4 M1 M2/(M1+M2)^2
P_MR_ION = 6        # M1/M2
P_KE_ION = 7        # electronic stopping: S_e = ke * sqrt(E) in eV/nm
P_A_REC = 8
P_EPSF_REC = 9
P_LAM_REC = 10
P_MR_REC = 11
P_KE_REC = 12
P_LE_MIN = 13       # table: log2(eps) origin
P_INV_DLE = 14
P_LB_MIN = 15       # table: log2(b) origin
P_INV_DLB = 16
P_KP_KL = 17        # Lindhard electronic coupling for the damage partition
N_PARAMS = 18

STATUS_STOPPED = 0
STATUS_BACKSCATTERED = 1


@kernel
def rng_uniform(state):
    """Advance a splitmix64 stream; returns (new_state, u) with u in [0, 1)."""
    state = state + RNG_GAMMA
    z = state
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    z = z ^ (z >> _S31)
    return state, (z >> _S11) * _INV53


@kernel
def deflect(dx, dy, dz, angle, azimuth):
    """Rotate a unit vector by ``angle`` about it, azimuth in its normal plane.

    The result is renormalized so repeated deflections keep |d| = 1 to well
    below 1e-9.
    """
    if abs(dz) < 0.9:
        e1x = dy
        e1y = -dx
        e1z = 0.0
    else:
        e1x = 0.0
        e1y = dz
        e1z = -dy
    n = math.sqrt(e1x * e1x + e1y * e1y + e1z * e1z)
    e1x /= n
    e1y /= n
    e1z /= n
    e2x = dy * e1z - dz * e1y
    e2y = dz * e1x - dx * e1z
    e2z = dx * e1y - dy * e1x
    ca = math.cos(angle)
    sa = math.sin(angle)
    cb = math.cos(azimuth)
    sb = math.sin(azimuth)
    nx = ca * dx + sa * (cb * e1x + sb * e2x)
    ny = ca * dy + sa * (cb * e1y + sb * e2y)
    nz = ca * dz + sa * (cb * e1z + sb * e2z)
    n = math.sqrt(nx * nx + ny * ny + nz * nz)
    return nx / n, ny / n, nz / n


@kernel
def table_lookup(s2tab, le_min, inv_dle, lb_min, inv_dlb, eps, b):
    """Bilinear interpolation of sin^2(theta_cm/2) in (log2 eps, log2 b).

    Inputs outside the tabulated range clamp to the edge; the table spans all
    energies/impact parameters reachable in practice (see implant module).
    """
    ne = s2tab.shape[0]
    nb = s2tab.shape[1]
    fe = (math.log2(eps) - le_min) * inv_dle
    fb = (math.log2(max(b, 1e-300)) - lb_min) * inv_dlb
    if fe < 0.0:
        fe = 0.0
    elif fe > ne - 1.000001:
        fe = ne - 1.000001
    if fb < 0.0:
        fb = 0.0
    elif fb > nb - 1.000001:
        fb = nb - 1.000001
    ie = int(fe)
    ib = int(fb)
    we = fe - ie
    wb = fb - ib
    return ((1.0 - we) * (1.0 - wb) * s2tab[ie, ib]
            + we * (1.0 - wb) * s2tab[ie + 1, ib]
            + (1.0 - we) * wb * s2tab[ie, ib + 1]
            + we * wb * s2tab[ie + 1, ib + 1])


@kernel
def damage_partition(t_ev, eps_fac, k_lindhard):
    """NRT/Lindhard estimate of the recoil energy left after electronic losses."""
    eps = eps_fac * t_ev
    g = 3.4008 * eps ** (1.0 / 6.0) + 0.40244 * eps ** 0.75 + eps
    return t_ev / (1.0 + k_lindhard * g)


@kernel
def run_chunk(seeds, i_begin, i_end, e0, full_cascade, params, s2tab):
    """Simulate ions [i_begin, i_end) and tally stops and vacancies.

    Returns (stop_x, status, vac_count, vac_weight_sum, vac_depths,
    vac_weights); the vacancy arrays are the per-ion records concatenated in
    ion order. Vacancy bookkeeping follows SRIM semantics: a displacement
    whose site is immediately refilled by a same-species striker (replacement
    collision) leaves no net vacancy, and a displaced atom spends the
    displacement energy on leaving its site.
    """
    m = i_end - i_begin
    stop_x = np.zeros(m)
    status = np.zeros(m, dtype=np.int8)
    vac_count = np.zeros(m, dtype=np.int64)
    vac_wsum = np.zeros(m)

    cap = 16384
    vac_depths = np.empty(cap, dtype=np.float32)
    vac_weights = np.empty(cap, dtype=np.float32)
    nvac = 0

    flight = params[P_FLIGHT]
    pmax = params[P_PMAX]
    ed = params[P_ED]
    le_min = params[P_LE_MIN]
    inv_dle = params[P_INV_DLE]
    lb_min = params[P_LB_MIN]
    inv_dlb = params[P_INV_DLB]
    kp_kl = params[P_KP_KL]

    stack_cap = 256
    stack = np.empty((stack_cap, 7))

    for k in range(m):
        state = seeds[i_begin + k]
        n_stack = 0
        energy = e0
        x = 0.0
        y = 0.0
        z = 0.0
        dx = 1.0
        dy = 0.0
        dz = 0.0
        is_primary = True
        alive = energy >= ed

        while True:
            if not alive:
                if n_stack == 0:
                    break
                n_stack -= 1
                energy = stack[n_stack, 0]
                x = stack[n_stack, 1]
                y = stack[n_stack, 2]
                z = stack[n_stack, 3]
                dx = stack[n_stack, 4]
                dy = stack[n_stack, 5]
                dz = stack[n_stack, 6]
                is_primary = False
                alive = True

            if is_primary:
                a_scr = params[P_A_ION]
                eps_fac = params[P_EPSF_ION]
                lam = params[P_LAM_ION]
                m_ratio = params[P_MR_ION]
                k_el = params[P_KE_ION]
            else:
                a_scr = params[P_A_REC]
                eps_fac = params[P_EPSF_REC]
                lam = params[P_LAM_REC]
                m_ratio = params[P_MR_REC]
                k_el = params[P_KE_REC]

            # free flight with electronic loss, then one nuclear collision
            loss = k_el * math.sqrt(energy) * flight
            if loss > energy:
                loss = energy
            x += flight * dx
            y += flight * dy
            z += flight * dz
            if x < 0.0:
                if is_primary:
                    status[k] = STATUS_BACKSCATTERED
                alive = False
                continue
            e_mid = energy - loss
            if e_mid < ed:
                if is_primary:
                    stop_x[k] = x
                alive = False
                continue

            state, u1 = rng_uniform(state)
            state, u2 = rng_uniform(state)
            p_impact = pmax * math.sqrt(u1)
            s2 = table_lookup(s2tab, le_min, inv_dle, lb_min, inv_dlb,
                              eps_fac * e_mid, p_impact / a_scr)
            transfer = lam * e_mid * s2
            cos_t = 1.0 - 2.0 * s2
            arg = s2 * (1.0 - s2)
            if arg < 0.0:
                arg = 0.0
            sin_t = 2.0 * math.sqrt(arg)
            psi = math.atan2(sin_t, m_ratio + cos_t)
            azimuth = 6.283185307179586 * u2
            e_next = e_mid - transfer

            if full_cascade:
                if transfer > ed:
                    # replacement: a stopping same-species striker refills the site
                    replaced = (not is_primary) and (e_next < ed)
                    if not replaced:
                        if nvac == cap:
                            new_cap = cap * 2
                            nd = np.empty(new_cap, dtype=np.float32)
                            nw = np.empty(new_cap, dtype=np.float32)
                            nd[:cap] = vac_depths
                            nw[:cap] = vac_weights
                            vac_depths = nd
                            vac_weights = nw
                            cap = new_cap
                        vac_depths[nvac] = np.float32(x)
                        vac_weights[nvac] = np.float32(1.0)
                        nvac += 1
                        vac_count[k] += 1
                        vac_wsum[k] += 1.0
                    recoil_e = transfer - ed
                    if recoil_e >= ed:
                        if n_stack == stack_cap:
                            new_cap = stack_cap * 2
                            ns = np.empty((new_cap, 7))
                            ns[:stack_cap] = stack
                            stack = ns
                            stack_cap = new_cap
                        ct = cos_t
                        if ct > 1.0:
                            ct = 1.0
                        elif ct < -1.0:
                            ct = -1.0
                        zeta = 0.5 * (math.pi - math.acos(ct))
                        rdx, rdy, rdz = deflect(dx, dy, dz, zeta,
                                                azimuth + math.pi)
                        stack[n_stack, 0] = recoil_e
                        stack[n_stack, 1] = x
                        stack[n_stack, 2] = y
                        stack[n_stack, 3] = z
                        stack[n_stack, 4] = rdx
                        stack[n_stack, 5] = rdy
                        stack[n_stack, 6] = rdz
                        n_stack += 1
            elif transfer >= ed:
                # Kinchin-Pease tally; thresholds act on the raw transfer
                t_dam = damage_partition(transfer, params[P_EPSF_REC], kp_kl)
                if transfer < 2.5 * ed:
                    nu = 1.0
                else:
                    nu = 0.8 * t_dam / (2.0 * ed)
                if nvac == cap:
                    new_cap = cap * 2
                    nd = np.empty(new_cap, dtype=np.float32)
                    nw = np.empty(new_cap, dtype=np.float32)
                    nd[:cap] = vac_depths
                    nw[:cap] = vac_weights
                    vac_depths = nd
                    vac_weights = nw
                    cap = new_cap
                vac_depths[nvac] = np.float32(x)
                vac_weights[nvac] = np.float32(nu)
                nvac += 1
                vac_count[k] += 1
                vac_wsum[k] += nu

            dx, dy, dz = deflect(dx, dy, dz, psi, azimuth)
            energy = e_next
            if energy < ed:
                if is_primary:
                    stop_x[k] = x
                alive = False

    return (stop_x, status, vac_count, vac_wsum,
            vac_depths[:nvac].copy(), vac_weights[:nvac].copy())
