"""Scratch: fast float-LP oracle for the pump case study, to pin down the
noise convention that reproduces the published bounds."""
import numpy as np
from scipy.optimize import linprog

RATES = [0, -1.2, 0, 0, -1.2, -2.5, 0, -1.7, -0.5, 0]
P = 2.2
L = 4.9


def slots_for(variant, eps, convention):
    pump_slots = range(10) if variant == "h1" else (1, 3, 5, 7, 9)
    slots = []
    for k, m in enumerate(RATES):
        if convention == "pos_precise":
            if eps == 0:
                c = (m, 0.0)
            elif m < 0:
                c = (m, eps)
            else:
                c = (-eps / 2, eps / 2)
            pr = P + m
            if eps == 0:
                pp = (pr, 0.0)
            elif pr < 0:
                pp = (pr, eps)
            elif pr == 0:
                pp = (-eps / 2, eps / 2)
            else:
                pp = (pr, 0.0)
        elif convention == "neg_only":
            c = (m, eps if m < 0 else 0.0)
            pr = P + m
            pp = (pr, eps if pr < 0 else 0.0)
        elif convention == "pump_precise":
            if eps == 0:
                c = (m, 0.0)
            elif m < 0:
                c = (m, eps)
            else:
                c = (-eps / 2, eps / 2)
            pp = (P + m, 0.0)
        elif convention == "machine_band_everywhere":
            if eps == 0:
                c = (m, 0.0)
            elif m < 0:
                c = (m, eps)
            else:
                c = (-eps / 2, eps / 2)
            pp = (P + c[0], c[1])
        slots.append({"c": c, "p": pp, "pump": k in pump_slots})
    return slots


def build_lp(slots, U, ta, tb, w_free=True, w_val=None):
    """Variables: [w?, (ton,toff) per pump slot]. Constraints:
    checkpoints lo >= L, hi <= U; final lo >= ta, hi <= tb."""
    pump_idx = [k for k, s in enumerate(slots) if s["pump"]]
    nv = (1 if w_free else 0) + 2 * len(pump_idx)
    A, b = [], []

    def var(k, which):  # ton=0, toff=1
        return (1 if w_free else 0) + 2 * pump_idx.index(k) + which

    # box: 0 <= ton <= toff <= 2
    for k in pump_idx:
        r = np.zeros(nv); r[var(k, 0)] = -1; A.append(r); b.append(0)
        r = np.zeros(nv); r[var(k, 0)] = 1; r[var(k, 1)] = -1; A.append(r); b.append(0)
        r = np.zeros(nv); r[var(k, 1)] = 1; A.append(r); b.append(2)

    # level tracking: nominal = w + sum of contributions, spread likewise
    nom = np.zeros(nv); nom_c = 0.0
    spr = np.zeros(nv); spr_c = 0.0
    if w_free:
        nom[0] = 1.0
    else:
        nom_c = w_val

    def checkpoint(lo_rhs=L, hi_rhs=None):
        hi_rhs = U if hi_rhs is None else hi_rhs
        A.append(-(nom - spr)); b.append(-(lo_rhs) + (nom_c - spr_c))
        A.append(nom + spr); b.append(hi_rhs - (nom_c + spr_c))

    checkpoint()
    for k, s in enumerate(slots):
        (cr, ce), (pr, pe) = s["c"], s["p"]
        if s["pump"]:
            # consume for ton, pump for toff-ton, consume for 2-toff
            d_on = np.zeros(nv); d_on[var(k, 0)] = 1.0
            d_p = np.zeros(nv); d_p[var(k, 1)] = 1.0; d_p[var(k, 0)] = -1.0
            d_off = np.zeros(nv); d_off[var(k, 1)] = -1.0
            nom = nom + cr * d_on; spr = spr + ce * d_on
            checkpoint()
            nom = nom + pr * d_p; spr = spr + pe * d_p
            checkpoint()
            nom = nom + cr * d_off; nom_c += cr * 2; spr = spr + ce * d_off; spr_c += ce * 2
            checkpoint()
        else:
            nom_c += cr * 2; spr_c += ce * 2
            checkpoint()
    # final in [ta, tb]
    A.append(-(nom - spr)); b.append(-ta + (nom_c - spr_c))
    A.append(nom + spr); b.append(tb - (nom_c + spr_c))
    return np.array(A), np.array(b), nv


def w_interval(slots, U, ta, tb):
    A, b, nv = build_lp(slots, U, ta, tb, w_free=True)
    lo = linprog(np.eye(nv)[0], A_ub=A, b_ub=b, bounds=[(None, None)] * nv, method="highs")
    hi = linprog(-np.eye(nv)[0], A_ub=A, b_ub=b, bounds=[(None, None)] * nv, method="highs")
    if not lo.success or not hi.success:
        return None
    return lo.fun, -hi.fun


def stable(slots, U, iters=60):
    ta, tb = L, U
    for _ in range(iters):
        res = w_interval(slots, U, ta, tb)
        if res is None:
            return None
        na, nb = max(res[0], ta), min(res[1], tb)
        if na > nb:
            return None
        if abs(na - ta) < 1e-12 and abs(nb - tb) < 1e-12:
            break
        ta, tb = na, nb
    return ta, tb


def min_u(slots_fn, lo=4.9, hi=26.0, tol=5e-4):
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if stable(slots_fn(mid), mid) is not None:
            hi = mid
        else:
            lo = mid
    return hi


if __name__ == "__main__":
    for conv in ["pos_precise", "neg_only", "pump_precise", "machine_band_everywhere"]:
        for variant, eps, expect in [("h1", 0.1, 7.16), ("h2", 0.1, 9.1)]:
            s = slots_for(variant, eps, conv)
            u = min_u(lambda U: s)
            st = stable(s, u + 1e-6)
            print(f"{conv:26s} {variant}(eps): U* ~= {u:.4f} (expect {expect}) stable ~= {st}")
        s0 = slots_for("h1", 0.0, conv)
        print(f"{conv:26s} h1 certain sanity: U* ~= {min_u(lambda U: s0):.4f} (expect 5.8375)")
