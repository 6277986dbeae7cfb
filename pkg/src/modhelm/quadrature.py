"""Periodic trapezoid rule with hybrid Gauss-trapezoid corrections for a
logarithmic singularity at a grid node.

A rule of order p replaces the trapezoid nodes ``j-a+1 .. j+a-1`` around the
singular node ``j`` by ``l`` symmetric pairs of off-grid nodes
``t_j +- h*v_n`` with weights ``h*u_n``.  The pairs make the one-sided rule
exact, in the generalized Euler-Maclaurin sense, for ``x^k`` and
``x^k log x``, ``k = 0..p-2``:

    sum_n u_n v_n^k         = -zeta(-k, a)
    sum_n u_n v_n^k log v_n =  zeta'(-k, a)

(Hurwitz zeta, derivative in the first argument), giving an error of
``O(h^p log h)``.  ``ALPERT_TABLES`` holds the solutions of these equations
to 50 digits; :func:`generate_alpert_rule` regenerates them.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .geometry import fourier_interpolate

SUPPORTED_ORDERS = (0, 2, 4, 8, 16)

# order p -> (a, [(v_n, u_n), ...]); v in units of h from the singular node.
ALPERT_TABLES = {
    2: (1, [
        ("0.15915494309189533576888376337251436203445964574046", "0.50000000000000000000000000000000000000000000000000"),
    ]),
    4: (2, [
        ("0.023796472841189736967858174447324323237812198335290", "0.087959426755938866256873692393181960744541355884996"),
        ("0.29353707415019145679623172039302603522589110228586", "0.49890171529136991034671370839427683963091067378618"),
        ("1.0237151242518902530139048546439227101889295119022", "0.91313885795269122339641259921254119962454797032883"),
    ]),
    8: (5, [
        ("0.0065318157085679182902359857694339067978006820064475", "0.024621941989952031578082081211391322469248995426962"),
        ("0.090867445846577286485117144438382613201729419597241", "0.17013158668541780983357622955957990439467564359506"),
        ("0.39679665333758776795082785310397415202863663204195", "0.46092563586500772359271846702499717065620801612522"),
        ("1.0278566405256457006269220178248218992116959880765", "0.79472911486218942681694174828876370968066649135559"),
        ("1.9452885929092660134044923079654364400416402922076", "1.0087104143379325892561392061313399987336211170546"),
        ("2.9801479338896396515837157168857638115453932454601", "1.0360936497262155814185065782576714558357058465740"),
        ("3.9988613499511230442037307450261635062591402037939", "1.0047876565332848375040356895262564382298738898685"),
    ]),
    16: (10, [
        ("0.00083715298320141132715636968839050627973458725043041", "0.0031909190866262344063113624232702833517306742182925"),
        ("0.012393827255426369824749088465282570337764900704577", "0.024236213804263380190272264424596914725713027965038"),
        ("0.060092907857394677720766142452114073886295913956203", "0.077401355216530879334511010214874128210496366072565"),
        ("0.18059912496019279292763802948408739854899039346202", "0.17048894202863690872360638755335266763840343812608"),
        ("0.41428325990280308840108128627231352913018467857247", "0.30291234785113086103041353704413180824802647591663"),
        ("0.79647477311124298422302945251159213007786602819201", "0.46522208349146166533236211048911762473507591474692"),
        ("1.3489938824670588089283657169387717443466731734123", "0.64014896370967683650190776798524255813569096519177"),
        ("2.0734716602643950276951974651282772392418066176450", "0.80512129461810611544027225224264796682070435856659"),
        ("2.9479049390314938047568866139765128828173474891974", "0.93624119456986465442495224789212358664016189279990"),
        ("3.9281292522486117452783722356924316865520546217915", "1.0143597753690751691300391318666791933232277785943"),
        ("4.9572030865631116948709109761529901528223783942669", "1.0351677210536568063516696764883629682047303833028"),
        ("5.9863601139774942220553211312522876682331373312161", "1.0203086249846103707907232305429258677133919810851"),
        ("6.9979577047915192782420202953213128621430891523654", "1.0047983974415139815723141067733458646344445390797"),
        ("7.9998887575246223974193661882336056365946670569539", "1.0003950173523092740140128813259116601766291522629"),
        ("8.9999987543061196012893278827569380149335630924836", "1.0000071494225368627566320327334169074415730520714"),
    ]),
}

# (a, l) used for each order.
ALPERT_SHAPES = {2: (1, 1), 4: (2, 3), 8: (5, 7), 16: (10, 15)}


@dataclass(frozen=True)
class AlpertRule:
    """Correction rule: band half-width ``a`` and ``l`` nodes/weights.

    ``order == 0`` is the plain trapezoid rule (``a = 1``, ``l = 0``) whose
    singular-node term is supplied separately as a finite limiting value.
    """

    order: int
    a: int
    offsets: np.ndarray
    weights: np.ndarray

    @property
    def l(self):
        return len(self.offsets)

    def min_nodes(self):
        return max(2 * self.a + 2, 4)


def alpert_rule(p):
    """Return the correction rule of order ``p`` in {0, 2, 4, 8, 16}."""
    if p not in SUPPORTED_ORDERS:
        raise ConfigurationError(f"unsupported quadrature order {p}; choose from {SUPPORTED_ORDERS}")
    if p == 0:
        return AlpertRule(0, 1, np.zeros(0), np.zeros(0))
    a, pairs = ALPERT_TABLES[p]
    v = np.array([float(x) for x, _ in pairs])
    u = np.array([float(w) for _, w in pairs])
    v.setflags(write=False)
    u.setflags(write=False)
    return AlpertRule(p, a, v, u)


def integrate_log_singular(f, n, j, rule, samples=None, diagonal=None, dps=None):
    """Integrate ``f(t) * s(t)`` over one period, ``f`` log-singular at ``t_j``.

    ``f`` is a callable evaluated at parameter values (grid and off-grid).
    ``samples`` optionally holds ``s`` at the ``n`` grid nodes; off-grid
    values come from its trigonometric interpolant (``s = 1`` if omitted).
    For the order-0 rule the singular node contributes ``h * diagonal``
    (default ``f(t_j)``, i.e. a finite limiting value supplied by ``f``).

    With ``dps`` set, the sum is carried out in mpmath at that precision
    using the full-precision rule tables; ``f`` must then accept and return
    mpmath numbers elementwise and ``samples`` is not supported.
    """
    if n < rule.min_nodes():
        raise ConfigurationError(f"N={n} too small for the order-{rule.order} rule")
    if dps is not None:
        return _integrate_mp(f, n, j, rule, diagonal, dps)
    h = 2 * np.pi / n
    idx = (j + np.arange(rule.a, n - rule.a + 1)) % n
    s_grid = np.ones(n) if samples is None else np.asarray(samples)
    total = h * np.sum(f(h * idx) * s_grid[idx])
    if rule.order == 0:
        diag = f(np.array([h * j]))[0] if diagonal is None else diagonal
        return total + h * diag * s_grid[j]
    t = h * j + np.concatenate([rule.offsets, -rule.offsets]) * h
    w = np.concatenate([rule.weights, rule.weights])
    s_off = 1.0 if samples is None else fourier_interpolate(s_grid, t)
    return total + h * np.sum(w * f(t) * s_off)


def _integrate_mp(f, n, j, rule, diagonal, dps):
    import mpmath

    with mpmath.workdps(dps):
        h = 2 * mpmath.pi / n
        total = mpmath.fsum(f(h * ((j + k) % n)) for k in range(rule.a, n - rule.a + 1))
        if rule.order == 0:
            diag = f(h * j) if diagonal is None else mpmath.mpf(diagonal)
            return h * (total + diag)
        _, pairs = ALPERT_TABLES[rule.order]
        corr = mpmath.fsum(
            mpmath.mpf(u) * (f(h * j + h * mpmath.mpf(v)) + f(h * j - h * mpmath.mpf(v)))
            for v, u in pairs
        )
        return h * (total + corr)


def trapezoid(f, n):
    h = 2 * np.pi / n
    return h * np.sum(f(h * np.arange(n)))


def _moment_targets(a, count, mp):
    out = []
    for k in range(count):
        out.append(-mp.zeta(-k, a))
        out.append(mp.zeta(-k, a, derivative=1))
    return out


def _moments(v, u, count, mp):
    out = []
    for k in range(count):
        out.append(mp.fsum(un * vn**k for vn, un in zip(v, u)))
        out.append(mp.fsum(un * vn**k * mp.log(vn) for vn, un in zip(v, u)))
    return out


def _jacobian(v, u, count, mp):
    # unknowns: log v_n, then u_n
    l = len(v)
    jac = mp.matrix(2 * count, 2 * l)
    for k in range(count):
        for n in range(l):
            lv = mp.log(v[n])
            vk = v[n] ** k
            jac[2 * k, n] = u[n] * k * vk
            jac[2 * k, l + n] = vk
            jac[2 * k + 1, n] = u[n] * vk * (k * lv + 1)
            jac[2 * k + 1, l + n] = vk * lv
    return jac


def _newton(v, u, target, count, tol, mp, maxiter=40):
    l = len(v)
    for _ in range(maxiter):
        res = [m - t for m, t in zip(_moments(v, u, count, mp), target)]
        err = max(abs(r) / (1 + abs(t)) for r, t in zip(res, target))
        if err < tol:
            return v, u, True
        try:
            step = mp.lu_solve(_jacobian(v, u, count, mp), mp.matrix([-r for r in res]))
        except ZeroDivisionError:
            return v, u, False
        v = [v[n] * mp.exp(step[n]) for n in range(l)]
        u = [u[n] + step[l + n] for n in range(l)]
    return v, u, False


def generate_alpert_rule(p, a=None, l=None, dps=50, start=None):
    """Solve the moment equations for the order-``p`` rule at ``dps`` digits.

    Without ``start``, a homotopy from a Gauss-Legendre-like rule on (0, a)
    is followed; with ``start`` (list of (v, u) pairs) plain Newton is run.
    Returns a list of (v, u) mpf pairs sorted by v.
    """
    import mpmath

    mp = mpmath.mp
    with mpmath.workdps(dps):
        a0, l0 = ALPERT_SHAPES[p]
        a = a0 if a is None else a
        l = l0 if l is None else l
        count = p - 1
        target = _moment_targets(a, count, mp)
        tol = mp.mpf(10) ** (-(dps - 8))
        if start is not None:
            v = [mp.mpf(x) for x, _ in start]
            u = [mp.mpf(w) for _, w in start]
            v, u, ok = _newton(v, u, target, count, tol, mp)
        else:
            t, w = np.polynomial.legendre.leggauss(l)
            t, w = (t + 1) / 2, w / 2
            v = [mp.mpf(a) * mp.mpf(x) ** 2 for x in t]
            u = [mp.mpf(a - 0.5) * 2 * mp.mpf(wi) * mp.mpf(x) for wi, x in zip(w, t)]
            base = _moments(v, u, count, mp)
            s, ds = mp.mpf(0), mp.mpf("0.05")
            ok = False
            while s < 1:
                sn = min(mp.mpf(1), s + ds)
                goal = [(1 - sn) * b + sn * g for b, g in zip(base, target)]
                step_tol = tol if sn == 1 else mp.mpf(10) ** -20
                vn, un, good = _newton(v, u, goal, count, step_tol, mp, maxiter=30)
                if good and all(x > 0 for x in vn):
                    v, u, s = vn, un, sn
                    ds = min(ds * 1.5, mp.mpf("0.2"))
                    ok = sn == 1
                else:
                    ds /= 2
                    if ds < 1e-7:
                        break
        if not ok:
            raise RuntimeError(f"moment equations for order {p} did not converge")
        return sorted(zip(v, u))
