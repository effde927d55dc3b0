"""Pure-Python twin of the compiled kernels in ``_core.pyx``.

Same signatures, same arithmetic order.  Used when the extension is not
built or when ``LRB_PURE_PYTHON=1``.
"""


def _gsva(v, r1, r0, rho, j1, j0, j2, s1, s0, s2, beta, h, max_sweeps, jacobi):
    n = len(v)
    diff = 0.0
    for sweep in range(1, max_sweeps + 1):
        old = v[:]
        diff = 0.0
        for i in range(n):
            p = rho[i]
            a = j1[i]
            b = j0[i]
            c = j2[i]
            if jacobi:
                q1 = r1[i] + beta * (p * old[a] + (1.0 - p) * old[b])
                q0 = r0 + beta * old[c]
            else:
                cont = 0.0
                self_w = 0.0
                if a == i and s1[i]:
                    self_w += p
                else:
                    cont += p * v[a]
                if b == i and s0[i]:
                    self_w += 1.0 - p
                else:
                    cont += (1.0 - p) * v[b]
                q1 = (r1[i] + beta * cont) / (1.0 - beta * self_w)
                if c == i and s2[i]:
                    q0 = r0 / (1.0 - beta)
                else:
                    q0 = r0 + beta * v[c]
            new = q1 if q1 >= q0 else q0
            v[i] = new
            diff += abs(new - old[i])
        if diff <= h:
            return sweep, diff
    return -1, diff


def _lists(*arrays):
    return [a.tolist() for a in arrays]


def gsva_solve(v, r1, r0, rho, j1, j0, j2, s1, s0, s2, beta, h, max_sweeps,
               jacobi=False):
    vl, r1, rho, j1, j0, j2, s1, s0, s2 = _lists(v, r1, rho, j1, j0, j2, s1, s0, s2)
    sweeps, resid = _gsva(vl, r1, float(r0), rho, j1, j0, j2, s1, s0, s2,
                          float(beta), float(h), int(max_sweeps), bool(jacobi))
    v[:] = vl
    return sweeps, resid


def subsidy_search(i, v, r1, rho, j1, j0, j2, s1, s0, s2, beta, eta0, alpha,
                   h, h_inner, max_sweeps, cap):
    vl, r1, rho, j1, j0, j2, s1, s0, s2 = _lists(v, r1, rho, j1, j0, j2, s1, s0, s2)
    eta = float(eta0)
    adv = 0.0
    status = 1
    t = 0
    for t in range(cap + 1):
        sweeps, _ = _gsva(vl, r1, eta, rho, j1, j0, j2, s1, s0, s2, beta,
                          h_inner, max_sweeps, False)
        if sweeps < 0:
            status = 2
            break
        p = rho[i]
        adv = (r1[i] + beta * (p * vl[j1[i]] + (1.0 - p) * vl[j0[i]])
               - (eta + beta * vl[j2[i]]))
        if abs(adv) <= h:
            status = 0
            break
        if t == cap:
            break
        eta = eta + alpha * adv
    v[:] = vl
    return eta, t, adv, status
