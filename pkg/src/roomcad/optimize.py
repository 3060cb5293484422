"""Derivative-free minimization: Powell's COBYLA, plus a Nelder-Mead simplex
fallback.

COBYLA keeps ``n + 1`` interpolation points (a simplex), fits linear models
of the objective and of every constraint through them, and takes the step
that minimizes the linear objective model inside a trust region of radius
``rho`` while not increasing the largest linearized constraint violation.
Constraint violations enter a merit function ``f + mu * max_violation``
whose penalty ``mu`` grows only when needed.  ``rho`` shrinks by half
whenever the current simplex cannot make progress, from ``rhobeg`` down to
``rhoend``.

Constraints are callables returning a value that is >= 0 when satisfied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OptimizeError

FEAS_TOL = 1e-6


@dataclass
class OptimizerState:
    """Snapshot of the search, updated after every evaluation."""

    method: str
    simplex: np.ndarray  # COBYLA: (n, n+1) displacements + pole; simplex: (n+1, n) vertices
    values: np.ndarray  # objective values at the simplex points
    rho: float
    nfev: int = 0
    best_x: np.ndarray | None = None
    best_f: float = math.inf


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    nfev: int
    status: str
    trace: list = field(default_factory=list)  # (eval index, f, best f, max violation, rho)
    state: OptimizerState | None = None


class _Evaluator:
    """Counts evaluations and keeps the best feasible point seen.

    Improvement must be strict, so a start point that is already optimal is
    returned bit-for-bit.
    """

    def __init__(self, fun, cons, budget, callback):
        self.fun, self.cons, self.budget, self.callback = fun, cons, budget, callback
        self.nfev = 0
        self.best_x = None
        self.best_f = math.inf
        self.trace = []
        self.rho = math.nan

    def __call__(self, x):
        self.nfev += 1
        f = float(self.fun(x))
        c = np.array([float(g(x)) for g in self.cons])
        viol = float(max(0.0, -c.min())) if len(c) else 0.0
        if viol <= FEAS_TOL and f < self.best_f:
            self.best_f, self.best_x = f, np.array(x, dtype=float)
        self.trace.append((self.nfev, f, self.best_f, viol, self.rho))
        if self.callback is not None:
            self.callback(self.nfev, np.array(x, dtype=float), f)
        return f, c, viol


def minimize(
    fun,
    x0,
    constraints=(),
    budget: int = 250,
    rhobeg: float = 0.5,
    rhoend: float = 1e-6,
    method: str = "cobyla",
    callback=None,
) -> OptimizeResult:
    """Minimize ``fun`` from ``x0`` using at most ``budget`` evaluations.

    Returns the best feasible point evaluated, so ``result.fun <= fun(x0)``.
    ``method`` is ``"cobyla"`` (default) or ``"simplex"`` (Nelder-Mead with
    constraints as an extreme barrier).
    """
    x0 = np.array(x0, dtype=float).ravel()
    n = len(x0)
    cons = list(constraints)
    if budget < n + 2:
        raise OptimizeError("budget-too-small", f"budget {budget} < n + 2 = {n + 2}")
    if not 0 < rhoend <= rhobeg:
        raise OptimizeError("bad-radius", f"need 0 < rhoend <= rhobeg, got {rhoend}, {rhobeg}")
    c0 = [float(g(x0)) for g in cons]
    if c0 and min(c0) < -FEAS_TOL:
        raise OptimizeError("infeasible-start", f"constraint value {min(c0):.3g} at x0")
    ev = _Evaluator(fun, cons, budget, callback)
    if method == "cobyla":
        state, status = _cobyla(ev, x0, len(cons), rhobeg, rhoend, budget)
    elif method == "simplex":
        state, status = _nelder_mead(ev, x0, rhobeg, rhoend, budget)
    else:
        raise OptimizeError("unknown-method", repr(method))
    state.nfev, state.best_x, state.best_f = ev.nfev, ev.best_x, ev.best_f
    return OptimizeResult(ev.best_x.copy(), ev.best_f, ev.nfev, status, ev.trace, state)


# ----------------------------------------------------------------------------
# COBYLA


def _cobyla(ev, x0, m, rhobeg, rhoend, maxfun):
    n = len(x0)
    alpha, beta, gamma, delta = 0.25, 2.1, 0.5, 1.1
    rho = rhobeg
    parmu = 0.0
    # columns 0..n-1: displacements of the other vertices from the pole,
    # column n: the pole (best vertex)
    sim = np.zeros((n, n + 1))
    sim[:, :n] = rho * np.eye(n)
    sim[:, n] = x0
    simi = np.eye(n) / rho
    datmat = np.zeros((m + 2, n + 1))  # constraints, f, max violation per vertex
    x = x0.copy()
    jdrop = n
    ibrnch = 0
    iflag = 1
    status = "converged"
    A = np.zeros((n, m + 1))
    dx = np.zeros(n)
    vsig = veta = np.zeros(n)
    parsig = prerec = prerem = 0.0
    conv = None
    label = 40

    def state():
        return OptimizerState("cobyla", sim.copy(), datmat[m].copy(), rho)

    while True:
        if label == 40:
            if ev.nfev >= maxfun:
                status = "budget"
                break
            ev.rho = rho
            f, c, resmax = ev(x)
            conv = np.r_[c, f, resmax]
            if ibrnch == 1:
                label = 440
                continue
            datmat[:, jdrop] = conv
            if ev.nfev <= n + 1:
                # building the initial simplex
                if jdrop < n:
                    if datmat[m, n] <= f:
                        x[jdrop] = sim[jdrop, n]
                    else:
                        sim[jdrop, n] = x[jdrop]
                        datmat[:, jdrop] = datmat[:, n]
                        datmat[:, n] = conv
                        for k in range(jdrop + 1):
                            sim[jdrop, k] = -rho
                            simi[jdrop, k] = -simi[k : jdrop + 1, k].sum()
                if ev.nfev <= n:
                    jdrop = ev.nfev - 1
                    x[jdrop] += rho
                    continue
            ibrnch = 1
            label = 140

        if label == 140:
            # move the best vertex into the pole position
            phimin = datmat[m, n] + parmu * datmat[m + 1, n]
            nbest = n
            for j in range(n):
                temp = datmat[m, j] + parmu * datmat[m + 1, j]
                if temp < phimin:
                    nbest, phimin = j, temp
                elif temp == phimin and parmu == 0.0 and datmat[m + 1, j] < datmat[m + 1, nbest]:
                    nbest = j
            if nbest < n:
                datmat[:, [n, nbest]] = datmat[:, [nbest, n]]
                shift = sim[:, nbest].copy()
                sim[:, nbest] = 0.0
                sim[:, n] += shift
                sim[:, :n] -= shift[:, None]
                simi[nbest, :] = -simi.sum(axis=0)
            err = np.abs(simi @ sim[:, :n] - np.eye(n)).max()
            if err > 0.1:
                status = "rounding"
                break
            # linear models: constraint gradients, then minus the objective gradient
            b = -datmat[: m + 1, n]
            A = ((datmat[: m + 1, :n] + b[:, None]) @ simi).T
            A[:, m] = -A[:, m]
            # simplex acceptability
            iflag = 1
            parsig = alpha * rho
            pareta = beta * rho
            vsig = 1.0 / np.sqrt((simi**2).sum(axis=1))
            veta = np.sqrt((sim[:, :n] ** 2).sum(axis=0))
            if np.any(vsig < parsig) or np.any(veta > pareta):
                iflag = 0
            if ibrnch == 1 or iflag == 1:
                label = 370
                continue
            # geometry step: replace the vertex that spoils the simplex most
            jdrop, temp = -1, pareta
            for j in range(n):
                if veta[j] > temp:
                    jdrop, temp = j, veta[j]
            if jdrop < 0:
                for j in range(n):
                    if vsig[j] < temp:
                        jdrop, temp = j, vsig[j]
            dx = gamma * rho * vsig[jdrop] * simi[jdrop, :]
            cvmaxp = cvmaxm = 0.0
            s = 0.0
            for k in range(m + 1):
                s = A[:, k] @ dx
                if k < m:
                    temp = datmat[k, n]
                    cvmaxp = max(cvmaxp, -s - temp)
                    cvmaxm = max(cvmaxm, s - temp)
            if parmu * (cvmaxp - cvmaxm) > s + s:
                dx = -dx
            _replace_vertex(sim, simi, jdrop, dx)
            x = sim[:, n] + dx
            label = 40
            continue

        if label == 370:
            dx, ifull = _trstlp(n, m, A, np.r_[b[:m], 0.0], rho)
            if not ifull and dx @ dx < 0.25 * rho * rho:
                ibrnch = 1
                label = 550
                continue
            # predicted change of f and of the max violation at x0 + dx
            resnew = 0.0
            bb = np.r_[b[:m], 0.0]
            s = 0.0
            for k in range(m + 1):
                s = bb[k] - A[:, k] @ dx
                if k < m:
                    resnew = max(resnew, s)
            barmu = 0.0
            prerec = datmat[m + 1, n] - resnew
            if prerec > 0.0:
                barmu = s / prerec
            if parmu < 1.5 * barmu:
                parmu = 2.0 * barmu
                phi = datmat[m, n] + parmu * datmat[m + 1, n]
                back = False
                for j in range(n):
                    temp = datmat[m, j] + parmu * datmat[m + 1, j]
                    if temp < phi or (temp == phi and parmu == 0.0 and datmat[m + 1, j] < datmat[m + 1, n]):
                        back = True
                        break
                if back:
                    label = 140
                    continue
            prerem = parmu * prerec - s
            x = sim[:, n] + dx
            ibrnch = 1
            label = 40
            continue

        if label == 440:
            f, resmax = conv[m], conv[m + 1]
            vmold = datmat[m, n] + parmu * datmat[m + 1, n]
            vmnew = f + parmu * resmax
            trured = vmold - vmnew
            if parmu == 0.0 and f == datmat[m, n]:
                prerem = prerec
                trured = datmat[m + 1, n] - resmax
            # choose the vertex to drop, if any
            ratio = 1.0 if trured <= 0.0 else 0.0
            jdrop = -1
            proj = np.abs(simi @ dx)
            for j in range(n):
                if proj[j] > ratio:
                    jdrop, ratio = j, proj[j]
            sigbar = proj * vsig
            edgmax = delta * rho
            ell = -1
            for j in range(n):
                if sigbar[j] >= parsig or sigbar[j] >= vsig[j]:
                    temp = veta[j]
                    if trured > 0.0:
                        temp = float(np.linalg.norm(dx - sim[:, j]))
                    if temp > edgmax:
                        ell, edgmax = j, temp
            if ell >= 0:
                jdrop = ell
            if jdrop < 0:
                label = 550
                continue
            _replace_vertex(sim, simi, jdrop, dx)
            datmat[:, jdrop] = conv
            if trured > 0.0 and trured >= 0.1 * prerem:
                label = 140
                continue
            label = 550

        if label == 550:
            if iflag == 0:
                ibrnch = 0
                label = 140
                continue
            if rho > rhoend:
                rho *= 0.5
                if rho <= 1.5 * rhoend:
                    rho = rhoend
                if parmu > 0.0:
                    denom = 0.0
                    cmin = cmax = 0.0
                    for k in range(m + 1):
                        cmin = min(datmat[k, n], datmat[k, :n].min())
                        cmax = max(datmat[k, n], datmat[k, :n].max())
                        if k < m and cmin < 0.5 * cmax:
                            temp = max(cmax, 0.0) - cmin
                            denom = temp if denom <= 0.0 else min(denom, temp)
                    if denom == 0.0:
                        parmu = 0.0
                    elif cmax - cmin < parmu * denom:
                        parmu = (cmax - cmin) / denom
                label = 140
                continue
            status = "converged"
            break
    return state(), status


def _replace_vertex(sim, simi, jdrop, dx):
    """Put displacement ``dx`` in column ``jdrop`` and update the inverse."""
    n = len(dx)
    sim[:, jdrop] = dx
    simi[jdrop] /= simi[jdrop] @ dx
    for j in range(n):
        if j != jdrop:
            simi[j] -= (simi[j] @ dx) * simi[jdrop]


def _negligible(terms, total):
    """True when ``total`` could be rounding noise relative to ``terms``."""
    sabs = np.abs(terms).sum()
    acca = sabs + 0.1 * abs(total)
    accb = sabs + 0.2 * abs(total)
    return sabs >= acca or acca >= accb


def _trstlp(n, m, A, b, rho):
    """Trust-region step for the linear models.

    Stage one finds the shortest step (length <= rho) minimizing the largest
    violation of ``A[:, k] @ dx >= b[k]``, k < m.  Stage two uses any
    remaining freedom to minimize ``-A[:, m] @ dx`` without increasing that
    violation.  Returns ``(dx, ifull)``; ``ifull`` is False when the step
    stops short of the trust-region boundary.
    """
    Z = np.eye(n)
    zdota = np.zeros(n + 1)
    dx = np.zeros(n)
    dxnew = np.zeros(n)
    sdirn = np.zeros(n)
    iact = np.arange(m + 1)
    vmultc = np.zeros(m + 1)
    vmultd = np.zeros(m + 1)
    mcon = m
    nact = 0
    resmax = 0.0
    resold = 0.0
    icon = -1
    optold = 0.0
    icount = 0
    nactx = 0
    if m >= 1:
        for k in range(m):
            if b[k] > resmax:
                resmax, icon = b[k], k
        vmultc[:m] = resmax - b[:m]
    label = 60 if resmax > 0.0 else 480

    while True:
        if label == 480:
            # switch to stage two: the objective joins as constraint m
            mcon = m + 1
            icon = m
            iact[m] = m
            vmultc[m] = 0.0
            label = 60

        if label == 490:
            if mcon == m:
                label = 480
                continue
            return dx, False

        if label == 60:
            optold = 0.0
            icount = 0
            label = 70

        if label == 70:
            optnew = resmax if mcon == m else -(dx @ A[:, m])
            if icount == 0 or optnew < optold:
                optold, nactx, icount = optnew, nact, 3
            elif nact > nactx:
                nactx, icount = nact, 3
            else:
                icount -= 1
                if icount == 0:
                    label = 490
                    continue
            if icon < nact:
                label = 260
            else:
                label = 100

        if label == 100:
            # add constraint iact[icon] to the active set
            kk = iact[icon]
            dxnew = A[:, kk].copy()
            tot = 0.0
            for k in range(n - 1, nact - 1, -1):
                terms = Z[:, k] * dxnew
                sp = terms.sum()
                if _negligible(terms, sp):
                    sp = 0.0
                if tot == 0.0:
                    tot = sp
                else:
                    temp = math.hypot(sp, tot)
                    a_, b_ = sp / temp, tot / temp
                    tot = temp
                    zk, zkp = Z[:, k].copy(), Z[:, k + 1].copy()
                    Z[:, k] = a_ * zk + b_ * zkp
                    Z[:, k + 1] = a_ * zkp - b_ * zk
            if tot != 0.0:
                nact += 1
                zdota[nact - 1] = tot
                vmultc[icon] = vmultc[nact - 1]
                vmultc[nact - 1] = 0.0
            else:
                # the new gradient depends on the active ones: drop one
                ratio = -1.0
                iout = -1
                for k in range(nact - 1, -1, -1):
                    terms = Z[:, k] * dxnew
                    zdotv = terms.sum()
                    if not _negligible(terms, zdotv):
                        temp = zdotv / zdota[k]
                        if temp > 0.0 and iact[k] < m:
                            tempa = vmultc[k] / temp
                            if ratio < 0.0 or tempa < ratio:
                                ratio, iout = tempa, k
                        if k >= 1:
                            dxnew -= temp * A[:, iact[k]]
                        vmultd[k] = temp
                    else:
                        vmultd[k] = 0.0
                if ratio < 0.0:
                    label = 490
                    continue
                vmultc[:nact] = np.maximum(0.0, vmultc[:nact] - ratio * vmultd[:nact])
                if iout < nact - 1:
                    _rotate_to_end(Z, zdota, iact, vmultc, A, iout, nact)
                temp = Z[:, nact - 1] @ A[:, kk]
                if temp == 0.0:
                    label = 490
                    continue
                zdota[nact - 1] = temp
                vmultc[icon] = 0.0
                vmultc[nact - 1] = ratio
            # label 210
            iact[icon] = iact[nact - 1]
            iact[nact - 1] = kk
            if mcon > m and kk != m:
                # keep the objective as the last active constraint
                k = nact - 2
                sp = Z[:, k] @ A[:, kk]
                temp = math.hypot(sp, zdota[nact - 1])
                a_, b_ = zdota[nact - 1] / temp, sp / temp
                zdota[nact - 1] = a_ * zdota[k]
                zdota[k] = temp
                zn, zk = Z[:, nact - 1].copy(), Z[:, k].copy()
                Z[:, nact - 1] = a_ * zk - b_ * zn
                Z[:, k] = a_ * zn + b_ * zk
                iact[nact - 1] = iact[k]
                iact[k] = kk
                vmultc[k], vmultc[nact - 1] = vmultc[nact - 1], vmultc[k]
            if mcon > m:
                label = 320
            else:
                kk = iact[nact - 1]
                temp = (sdirn @ A[:, kk] - 1.0) / zdota[nact - 1]
                sdirn -= temp * Z[:, nact - 1]
                label = 340

        if label == 260:
            # delete constraint iact[icon] from the active set
            if icon < nact - 1:
                _rotate_to_end(Z, zdota, iact, vmultc, A, icon, nact)
            nact -= 1
            if mcon > m:
                label = 320
            else:
                temp = sdirn @ Z[:, nact]
                sdirn -= temp * Z[:, nact]
                label = 340

        if label == 320:
            sdirn = Z[:, nact - 1] / zdota[nact - 1]
            label = 340

        if label == 340:
            # step along sdirn to the trust-region boundary (or to zero violation)
            dd = rho * rho
            big = np.abs(dx) >= 1e-6 * rho
            dd -= (dx[big] ** 2).sum()
            sd = dx @ sdirn
            ss = sdirn @ sdirn
            if dd <= 0.0:
                label = 490
                continue
            temp = math.sqrt(ss * dd)
            if abs(sd) >= 1e-6 * temp:
                temp = math.sqrt(ss * dd + sd * sd)
            stpful = dd / (temp + sd)
            step = stpful
            if mcon == m:
                acca = step + 0.1 * resmax
                accb = step + 0.2 * resmax
                if step >= acca or acca >= accb:
                    label = 480
                    continue
                step = min(step, resmax)
            dxnew = dx + step * sdirn
            if mcon == m:
                resold = resmax
                resmax = 0.0
                for k in range(nact):
                    kk = iact[k]
                    resmax = max(resmax, b[kk] - A[:, kk] @ dxnew)
            # multipliers the active set would have at dxnew
            for k in range(nact - 1, -1, -1):
                terms = Z[:, k] * dxnew
                zdotw = terms.sum()
                if _negligible(terms, zdotw):
                    zdotw = 0.0
                vmultd[k] = zdotw / zdota[k]
                if k >= 1:
                    dxnew -= vmultd[k] * A[:, iact[k]]
            if mcon > m and nact > 0:
                vmultd[nact - 1] = max(0.0, vmultd[nact - 1])
            dxnew = dx + step * sdirn
            for k in range(nact, mcon):
                kk = iact[k]
                terms = A[:, kk] * dxnew
                s = resmax - b[kk] + terms.sum()
                sabs = resmax + abs(b[kk]) + np.abs(terms).sum()
                if sabs >= sabs + 0.1 * abs(s) or sabs + 0.1 * abs(s) >= sabs + 0.2 * abs(s):
                    s = 0.0
                vmultd[k] = s
            # fraction of the step that keeps all multipliers/residuals >= 0
            ratio = 1.0
            icon = -1
            for k in range(mcon):
                if vmultd[k] < 0.0:
                    temp = vmultc[k] / (vmultc[k] - vmultd[k])
                    if temp < ratio:
                        ratio, icon = temp, k
            temp = 1.0 - ratio
            dx = temp * dx + ratio * dxnew
            vmultc[:mcon] = np.maximum(0.0, temp * vmultc[:mcon] + ratio * vmultd[:mcon])
            if mcon == m:
                resmax = resold + ratio * (resmax - resold)
            if icon >= 0:
                label = 70
                continue
            if step == stpful:
                return dx, True
            label = 480
            continue


def _rotate_to_end(Z, zdota, iact, vmultc, A, pos, nact):
    """Cycle active constraint ``pos`` to position ``nact - 1`` with Givens
    rotations, keeping Z's leading columns a QR basis of the active set."""
    isave, vsave = iact[pos], vmultc[pos]
    k = pos
    while k < nact - 1:
        kp = k + 1
        kk = iact[kp]
        sp = Z[:, k] @ A[:, kk]
        temp = math.hypot(sp, zdota[kp])
        a_, b_ = zdota[kp] / temp, sp / temp
        zdota[kp] = a_ * zdota[k]
        zdota[k] = temp
        zkp, zk = Z[:, kp].copy(), Z[:, k].copy()
        Z[:, kp] = a_ * zk - b_ * zkp
        Z[:, k] = a_ * zkp + b_ * zk
        iact[k] = kk
        vmultc[k] = vmultc[kp]
        k = kp
    iact[k] = isave
    vmultc[k] = vsave


# ----------------------------------------------------------------------------
# Nelder-Mead fallback


def _nelder_mead(ev, x0, step, xtol, maxfun):
    """Classic Nelder-Mead (reflection 1, expansion 2, contraction 0.5,
    shrink 0.5); infeasible points score +inf."""
    n = len(x0)

    def fx(x):
        f, _, viol = ev(x)
        return f if viol <= FEAS_TOL else math.inf

    ev.rho = step
    pts = [x0.copy()]
    vals = [fx(x0)]
    for i in range(n):
        if ev.nfev >= maxfun:
            break
        p = x0.copy()
        p[i] += step
        pts.append(p)
        vals.append(fx(p))
    pts = np.array(pts)
    vals = np.array(vals)
    status = "budget"
    while ev.nfev < maxfun and len(pts) == n + 1:
        order = np.argsort(vals, kind="stable")
        pts, vals = pts[order], vals[order]
        if np.max(np.abs(pts[1:] - pts[0])) <= xtol and np.max(np.abs(vals[1:] - vals[0])) <= 1e-14:
            status = "converged"
            break
        ev.rho = float(np.max(np.abs(pts[1:] - pts[0])))
        centroid = pts[:-1].mean(axis=0)
        xr = centroid + (centroid - pts[-1])
        fr = fx(xr)
        if fr < vals[0]:
            if ev.nfev >= maxfun:
                pts[-1], vals[-1] = xr, fr
                break
            xe = centroid + 2.0 * (centroid - pts[-1])
            fe = fx(xe)
            pts[-1], vals[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < vals[-2]:
            pts[-1], vals[-1] = xr, fr
        else:
            if ev.nfev >= maxfun:
                break
            if fr < vals[-1]:
                xc = centroid + 0.5 * (xr - centroid)
            else:
                xc = centroid + 0.5 * (pts[-1] - centroid)
            fc = fx(xc)
            if fc < min(fr, vals[-1]):
                pts[-1], vals[-1] = xc, fc
            else:
                for i in range(1, n + 1):
                    if ev.nfev >= maxfun:
                        break
                    pts[i] = pts[0] + 0.5 * (pts[i] - pts[0])
                    vals[i] = fx(pts[i])
    return OptimizerState("simplex", pts, vals, float(np.max(np.abs(pts[1:] - pts[0])) if len(pts) > 1 else 0.0)), status
