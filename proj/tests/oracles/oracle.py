"""Reference values for the pinned unit tests.

Everything here is computed independently of the C++ code: closed forms,
scipy's HiGHS LP solver for transport problems, and continuous 1-D
minimization for the multiplier. Run with `python3 oracle.py`.
"""
import json
import math

import numpy as np
from scipy.optimize import linprog, minimize_scalar


def lse(values, eps):
    v = np.asarray(values, float) / eps
    m = v.max()
    return eps * (m + math.log(np.exp(v - m).sum()) - math.log(len(values)))


def worst_case(p_pts, p_w, loss, rho, grid):
    """max_Q E_Q[loss] with W2(P, Q) <= rho, Q on the grid (transport LP)."""
    n, m = len(p_pts), len(grid)
    cost = np.array([[np.sum((np.asarray(a) - np.asarray(g)) ** 2) for g in grid] for a in p_pts])
    lv = np.array([loss(g) for g in grid])
    c = -np.tile(lv, n)
    a_eq = np.zeros((n, n * m))
    for i in range(n):
        a_eq[i, i * m:(i + 1) * m] = 1.0
    res = linprog(c, A_ub=cost.reshape(1, -1), b_ub=[rho * rho], A_eq=a_eq, b_eq=p_w,
                  bounds=(0, None), method="highs")
    pi = res.x.reshape(n, m)
    return -res.fun, pi.sum(axis=0)


def surrogate(p_pts, p_w, loss, rho, lam, grid):
    gl = np.array([loss(g) for g in grid])
    tot = lam * rho * rho
    for x, w in zip(p_pts, p_w):
        d = np.array([np.sum((np.asarray(x) - np.asarray(g)) ** 2) for g in grid])
        tot += w * np.max(gl - lam * d)
    return tot


def lambda_star(p_pts, p_w, loss, rho, grid):
    f = lambda t: surrogate(p_pts, p_w, loss, rho, math.exp(t), grid)
    ts = np.linspace(math.log(1e-3), math.log(1e3), 2001)
    vals = [f(t) for t in ts]
    k = int(np.argmin(vals))
    r = minimize_scalar(f, bounds=(ts[max(k - 1, 0)], ts[min(k + 1, len(ts) - 1)]), method="bounded",
                        options={"xatol": 1e-10})
    return math.exp(r.x), r.fun


def lemma1_linear_family():
    grid = [[x] for x in np.linspace(-2, 2, 401)]
    p_pts, p_w = [[-0.5], [0.5]], [0.5, 0.5]
    fam = [lambda x: x[0], lambda x: 2 * x[0], lambda x: -x[0]]
    rho, lip = 0.3, 2.0
    lam = lip / rho
    worst_q = [worst_case(p_pts, p_w, h, rho, grid)[1] for h in fam]
    # Q's: P itself and each member's worst case, all supported on the grid.
    qs = [np.array([0.5 if abs(g[0]) == 0.5 else 0.0 for g in grid])] + worst_q
    surr = [surrogate(p_pts, p_w, h, rho, lam, grid) for h in fam]
    out = []
    for j, h in enumerate(fam):
        ls, _ = lambda_star(p_pts, p_w, h, rho, grid)
        bound = 2 * lip * rho + abs(lam - ls) * rho * rho
        gap = 0.0
        for q in qs:
            eq = [float(np.dot(q, [f(g) for g in grid])) for f in fam]
            gap = max(gap, abs((eq[j] - min(eq)) - (surr[j] - min(surr))))
        out.append({"member": j, "lambda_star": ls, "bound": bound, "excess_gap": gap, "margin": 1 - gap / bound})
    return out


def outer_toy():
    # identity decoder, s = z = 0.3, gamma large: grid search over z~ in 1-D
    s, z = 0.3, 0.3
    res = {}
    for gamma in (1e2, 1e4):
        zs = np.linspace(-1, 1, 200001)
        vals = (zs - s) ** 2 - gamma * (zs - z) ** 2
        res[str(gamma)] = float(vals.max())
    return res


def main():
    c1 = (0.01) ** 2
    vals = {
        "lse_1_3_eps1": lse([1, 3], 1.0),
        "lse_1_3_eps001": lse([1, 3], 0.01),
        "rayleigh_mean": math.sqrt(math.pi) / 2 / math.sqrt(1.0),  # sigma sqrt(pi/2), sigma = 1/sqrt(2)
        "noise_var_power2_snr30103": 2.0 / 10 ** (3.0103 / 10),
        "ssim_const0_const1": c1 / (1 + c1),
        "bleu_ab_abcd_n2": math.exp(1 - 4 / 2),
        "inner_toy_total_rho0.5": 0.25 + 0.25,
        "adam_first_step_lr0.1_g0.5": -0.1 * 0.5 / (0.5 + 1e-8),
        "point_mass_linear_worst": worst_case([[0.0]], [1.0], lambda x: x[0], 0.5,
                                              [[x] for x in np.linspace(-1, 1, 201)])[0],
        "point_mass_linear_lambda_star": lambda_star([[0.0]], [1.0], lambda x: x[0], 0.5,
                                                     [[x] for x in np.linspace(-1, 1, 201)]),
        "two_point_slope2_worst": worst_case([[-0.5], [0.5]], [0.5, 0.5], lambda x: 2 * x[0], 0.3,
                                             [[x] for x in np.linspace(-2, 2, 401)])[0],
        "w1_uniform01_vs_delta0": 0.5,
        "lemma1_linear_family": lemma1_linear_family(),
        "outer_toy_max": outer_toy(),
    }
    print(json.dumps(vals, indent=2))


if __name__ == "__main__":
    main()
