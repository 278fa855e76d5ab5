"""Asymptotic analysis: the degree-share fixed point and power-law exponent constants.

Notation used throughout (all quantities normalised by the number of edges t):

* ``s = p + q``         probability that a step adds a node
* ``I_R, I_B``          in-degree sampling weight of the red / blue group,
                        ``theta_in + s*r*delta`` and ``(1-theta_in) + s*(1-r)*delta``
* ``O_R, O_B``          the same for out-degree
* ``tot = 1 + s*delta`` total sampling weight

A term of the form ``numerator / denominator`` whose numerator is exactly zero
evaluates to zero even when the denominator vanishes as well. This happens at
homophily corners (e.g. rho_blue = 0, rho_red = 1) where a colour combination
can never be accepted and its acceptance mass is identically zero.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .errors import ClosedFormMismatch, DegenerateDenominator, Indeterminate, NoConvergence
from .model import AnalyticParams, ThetaPair, color_swap

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 10**6
CLOSED_FORM_ATOL = 1e-9
GCE_TOL = 1e-9


def _frac(num, den, term):
    if num == 0.0:
        return 0.0
    if not den > 0.0:
        raise DegenerateDenominator(term, den)
    return num / den


# -- the contraction map ------------------------------------------------------


def acceptance_shares(theta: ThetaPair, ap: AnalyticParams) -> dict:
    """Limiting link-formation probabilities ``p̄`` with the O(t^-1/4) noise dropped.

    Keys follow ``<event><first colour><second colour>``: for events 1 and 2 the
    first colour is the new node's and the second the existing endpoint's; for
    event 3 the pair is (followed, follower).
    """
    r, rb, p, q, d = ap.r, ap.r_blue, ap.p, ap.q, ap.delta
    rB, rR = ap.rho_blue, ap.rho_red
    s = p + q
    ti, to, bi, bo = theta.theta_in, theta.theta_out, theta.blue_in, theta.blue_out
    I_R = ti + s * r * d
    I_B = bi + s * rb * d
    O_R = to + s * r * d
    O_B = bo + s * rb * d
    tot = 1.0 + s * d

    out = {
        "1RR": _frac(I_R * rR, tot - I_B * rB - I_R * (1 - rR), "p1_RR"),
        "1BR": _frac(I_R * (1 - rR), tot - I_B * (1 - rB) - I_R * rR, "p1_BR"),
        "2RR": _frac(O_R * rR, tot - O_B * rR - O_R * (1 - rR), "p2_RR"),
        "2BR": _frac(O_R * (1 - rB), tot - O_B * (1 - rB) - O_R * rB, "p2_BR"),
    }
    den3 = (
        tot * tot
        - O_B * I_B * (1 - rB)
        - O_B * I_R * rR
        - O_R * I_B * rB
        - O_R * I_R * (1 - rR)
    )
    out["3RR"] = _frac(O_R * I_R * rR, den3, "p3_RR")
    out["3BR"] = _frac(O_B * I_R * (1 - rR), den3, "p3_BR")
    out["3RB"] = _frac(O_R * I_B * (1 - rB), den3, "p3_RB")
    return out


def contraction_map(theta: ThetaPair, ap: AnalyticParams) -> ThetaPair:
    """One-step expected drift target ``F(theta)`` of the red degree shares."""
    pb = acceptance_shares(theta, ap)
    r, rb, p, q = ap.r, ap.r_blue, ap.p, ap.q
    p3 = 1.0 - p - q
    f_in = p * (r * pb["1RR"] + rb * pb["1BR"]) + q * r + p3 * (pb["3RR"] + pb["3BR"])
    f_out = p * r + q * (r * pb["2RR"] + rb * pb["2BR"]) + p3 * (pb["3RR"] + pb["3RB"])
    return ThetaPair(f_in, f_out)


@dataclass(frozen=True)
class FixedPointResult:
    theta_star: ThetaPair
    iterations: int
    residual: float
    converged: bool
    warnings: tuple = ()


def solve_fixed_point(ap: AnalyticParams, tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER,
                      theta0: ThetaPair | None = None) -> FixedPointResult:
    """Iterate ``theta <- F(theta)`` until the sup-norm step drops below ``tol``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    theta = ThetaPair(ap.r, ap.r, ap.r_blue, ap.r_blue) if theta0 is None else theta0
    residual = math.inf
    for k in range(1, max_iter + 1):
        nxt = contraction_map(theta, ap)
        residual = max(abs(nxt.theta_in - theta.theta_in), abs(nxt.theta_out - theta.theta_out))
        theta = nxt
        if residual < tol:
            return FixedPointResult(theta, k, residual, True)
    partial = FixedPointResult(theta, max_iter, residual, False)
    raise NoConvergence(max_iter, residual, partial)


def jacobian(ap: AnalyticParams, theta: ThetaPair, h: float = 1e-6):
    """Central finite-difference Jacobian of ``F`` as a nested 2x2 list."""
    ti, to = theta.theta_in, theta.theta_out
    fp = contraction_map(ThetaPair(ti + h, to), ap)
    fm = contraction_map(ThetaPair(ti - h, to), ap)
    gp = contraction_map(ThetaPair(ti, to + h), ap)
    gm = contraction_map(ThetaPair(ti, to - h), ap)
    return [
        [(fp.theta_in - fm.theta_in) / (2 * h), (gp.theta_in - gm.theta_in) / (2 * h)],
        [(fp.theta_out - fm.theta_out) / (2 * h), (gp.theta_out - gm.theta_out) / (2 * h)],
    ]


def contraction_diagnostic(ap: AnalyticParams, theta: ThetaPair, h: float = 1e-6) -> float:
    """Frobenius norm of the numerical Jacobian of ``F``; < 1 certifies local contraction."""
    if not h > 0:
        raise ValueError("h must be positive")
    J = jacobian(ap, theta, h)
    return math.sqrt(sum(x * x for row in J for x in row))


# -- exponent constants -------------------------------------------------------


@dataclass(frozen=True)
class ExponentConstants:
    c_in: float
    c_out: float

    @staticmethod
    def _gamma(c):
        return math.inf if c == 0 else 1.0 + 1.0 / c

    @property
    def gamma_in(self) -> float:
        return self._gamma(self.c_in)

    @property
    def gamma_out(self) -> float:
        return self._gamma(self.c_out)


def exponent_constants_red(ap: AnalyticParams, theta_star: ThetaPair) -> ExponentConstants:
    # closed forms for C_in(R) and C_out(R), term by term as printed
    r, rb, p, q, d = ap.r, ap.r_blue, ap.p, ap.q, ap.delta
    rB, rR = ap.rho_blue, ap.rho_red
    ti, to, bi, bo = theta_star.theta_in, theta_star.theta_out, theta_star.blue_in, theta_star.blue_out
    s = p + q
    p3 = 1.0 - p - q
    red_in = r * d * s + ti        # (r d (p+q) + theta_in)
    red_out = r * d * s + to
    blue_in = d * rb * s + bi      # (d (1-r)(p+q) - theta_in + 1)
    blue_out = d * rb * s + bo
    den3 = (
        -rB * red_out * blue_in
        - rR * red_in * blue_out
        - (1 - rB) * blue_in * blue_out
        - (1 - rR) * red_in * red_out
        + (d * s + 1) ** 2
    )

    c_in = (
        _frac(r * p * rR, d * s - rB * blue_in - (1 - rR) * red_in + 1, "C_in(R) term 1")
        + _frac(p * rb * (1 - rR), d * s - rR * red_in - (1 - rB) * blue_in + 1, "C_in(R) term 2")
        + _frac(p3 * (rR * red_out + (1 - rR) * blue_out), den3, "C_in(R) term 3")
    )
    c_out = (
        _frac(r * q * rR, d * s - rR * blue_out - (1 - rR) * red_out + 1, "C_out(R) term 1")
        + _frac(q * rb * (1 - rB), d * s - rB * red_out - (1 - rB) * blue_out + 1, "C_out(R) term 2")
        + _frac(p3 * (rR * red_in + (1 - rB) * blue_in), den3, "C_out(R) term 3")
    )
    return ExponentConstants(c_in, c_out)


def rate_constant_in(ap: AnalyticParams, theta: ThetaPair) -> float:
    """Per-unit-weight rate at which a red node gains a followee, ``A(theta)``.

    The in-degree histogram of red nodes obeys
    ``m_k / m_{k-1} = (k-1+delta) A / ((k+delta) A + 1)``, a power law with
    exponent ``1 + 1/A(theta*)``; at the fixed point this must equal
    ``exponent_constants_red(...).c_in``.
    """
    r, rb, p, q, d = ap.r, ap.r_blue, ap.p, ap.q, ap.delta
    rB, rR = ap.rho_blue, ap.rho_red
    ti, to, bi, bo = theta.theta_in, theta.theta_out, theta.blue_in, theta.blue_out
    s = p + q
    w_red_in = ti + d * s * r
    w_blue_in = bi + d * s * rb
    w_red_out = to + s * r * d
    w_blue_out = bo + s * rb * d
    norm = 1 + d * s

    new_blue = _frac(p * rb * (1 - rR), norm - w_red_in * rR - w_blue_in * (1 - rB), "A term 1")
    new_red = _frac(p * r * rR, norm - w_red_in * (1 - rR) - w_blue_in * rB, "A term 2")
    den = (
        (1 + s * d) ** 2
        - w_blue_out * w_blue_in * (1 - rB)
        - w_blue_out * w_red_in * rR
        - w_red_out * w_blue_in * rB
        - w_red_out * w_red_in * (1 - rR)
    )
    densify = _frac((1 - p - q) * (w_blue_out * (1 - rR) + w_red_out * rR), den, "A term 3")
    return new_blue + new_red + densify


# -- special cases with closed forms -----------------------------------------


@dataclass(frozen=True)
class ClosedFormResult:
    case: str
    theta_star: ThetaPair
    red: ExponentConstants
    blue: ExponentConstants


def _no_densification(ap):
    return ap.q == 1.0 - ap.p or ap.p + ap.q == 1.0


def special_case(ap: AnalyticParams) -> ClosedFormResult | None:
    """Closed-form fixed point and constants when the homophily pair hits a solvable corner."""
    r, p, q, d = ap.r, ap.p, ap.q, ap.delta
    rB, rR = ap.rho_blue, ap.rho_red
    s = p + q

    # with one group empty its constants are vacuous (case iv is 0/0 at p=1)
    if not 0.0 < r < 1.0:
        return None

    if rB == 0.5 and rR == 0.5:
        c = ExponentConstants((1 - q) / (d * s + 1), (1 - p) / (d * s + 1))
        return ClosedFormResult("i", ThetaPair(r, r), c, c)

    if rB == 1.0 and rR == 1.0 and _no_densification(ap):
        c = ExponentConstants(p / (d + 1), (1 - p) / (d + 1))
        return ClosedFormResult("ii", ThetaPair(r, r), c, c)

    if rB == 0.0 and rR == 0.0 and _no_densification(ap):
        t_in = r * (1 - 2 * p) + p
        red = ExponentConstants(
            p * (1 - r) / (r * (1 + d) + p * (1 - 2 * r)),
            (1 - p) * (1 - r) / (r * (d - 1) + p * (2 * r - 1) + 1),
        )
        blue = ExponentConstants(
            p * r / ((1 - r) * (1 + d) + p * (2 * r - 1)),
            (1 - p) * r / ((1 - r) * (d - 1) + p * (1 - 2 * r) + 1),
        )
        return ClosedFormResult("iii", ThetaPair(t_in, 1 - t_in), red, blue)

    if rB == 0.0 and rR == 1.0:
        t_in = (r * (p * d * (1 - s * (1 - r)) + q * (1 + d))) / (p * (1 - r + d) + q * (1 + d))
        t_out = 1 - p * (1 - r)
        c_in = (1 - p * (1 - r) - q) / (d * s + 1)
        red = ExponentConstants(c_in, (1 - p) / (p * (r * (1 + d) - 1) + q * r * d + 1))
        blue = ExponentConstants(c_in, 0.0)
        return ClosedFormResult("iv", ThetaPair(t_in, t_out), red, blue)

    return None


# -- glass ceiling ------------------------------------------------------------


class GCEVerdict(str, enum.Enum):
    RED = "RedFacesGCE"
    BLUE = "BlueFacesGCE"
    NONE = "NoGCE"

    def swapped(self) -> "GCEVerdict":
        return {GCEVerdict.RED: GCEVerdict.BLUE, GCEVerdict.BLUE: GCEVerdict.RED}.get(self, self)


@dataclass(frozen=True)
class GlassCeilingVerdict:
    red_score: float
    blue_score: float
    verdict: GCEVerdict


def _inv(c):
    return math.inf if c == 0 else 1.0 / c


def gce_score(c: ExponentConstants) -> float:
    """``1/C_in - 1/C_out`` in extended reals: the log-log slope of top_out/top_in."""
    a, b = _inv(c.c_in), _inv(c.c_out)
    if math.isinf(a) and math.isinf(b):
        return math.nan
    return a - b


def glass_ceiling(report: "ExponentReport", tol: float = GCE_TOL) -> GlassCeilingVerdict:
    red = gce_score(report.red)
    blue = gce_score(report.blue)
    if math.isnan(red) or math.isnan(blue):
        raise Indeterminate("a group has both exponent constants equal to zero")
    if math.isinf(red) and math.isinf(blue) and (red > 0) == (blue > 0):
        raise Indeterminate(f"both scores are {red}")
    diff = red - blue
    if abs(diff) <= tol:
        v = GCEVerdict.NONE
    elif diff < 0:
        v = GCEVerdict.RED
    else:
        v = GCEVerdict.BLUE
    return GlassCeilingVerdict(red, blue, v)


# -- both groups --------------------------------------------------------------


@dataclass(frozen=True)
class ExponentReport:
    red: ExponentConstants
    blue: ExponentConstants
    theta_star: ThetaPair
    derivation: str
    fixed_point: FixedPointResult | None = None
    closed_form: ClosedFormResult | None = None
    contraction_norm: float = math.nan
    warnings: tuple = field(default=())

    @property
    def contraction_warning(self) -> bool:
        return not (self.contraction_norm < 1.0)

    def verdict(self, tol: float = GCE_TOL):
        try:
            return glass_ceiling(self, tol)
        except Indeterminate:
            return None

    def to_json(self) -> dict:
        v = self.verdict()
        out = {
            "theta_in_star": self.theta_star.theta_in,
            "theta_out_star": self.theta_star.theta_out,
            "c_in_red": self.red.c_in,
            "c_out_red": self.red.c_out,
            "c_in_blue": self.blue.c_in,
            "c_out_blue": self.blue.c_out,
            "gamma_in_red": _jnum(self.red.gamma_in),
            "gamma_out_red": _jnum(self.red.gamma_out),
            "gamma_in_blue": _jnum(self.blue.gamma_in),
            "gamma_out_blue": _jnum(self.blue.gamma_out),
            "gce_verdict": v.verdict.value if v else "indeterminate",
            "gce_score_red": _jnum(v.red_score) if v else "nan",
            "gce_score_blue": _jnum(v.blue_score) if v else "nan",
            "derivation": self.derivation,
            "contraction_norm": _jnum(self.contraction_norm),
            "contraction_warning": self.contraction_warning,
        }
        if self.fixed_point is not None:
            out["iterations"] = self.fixed_point.iterations
            out["residual"] = self.fixed_point.residual
        return out


def _jnum(x):
    """JSON-safe number: non-finite values become the lowercase CSV literals."""
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _is_canonical(ap: AnalyticParams) -> bool:
    # homophily first: at the (rho_blue, rho_red) = (0, 1) corner the event-1
    # acceptance mass of a blue newcomer is identically zero and F depends on
    # which colour carries that 0/0 term; the canonical side is the one whose
    # convention reproduces the known closed form
    return (ap.rho_blue, ap.rho_red, ap.r) <= (ap.rho_red, ap.rho_blue, ap.r_blue)


def exponents_both_groups(ap: AnalyticParams, tol: float = DEFAULT_TOL,
                          max_iter: int = DEFAULT_MAX_ITER) -> ExponentReport:
    """Solve for theta*, then red constants directly and blue constants via colour swap.

    The fixed point is always solved in a canonical colour orientation, so a
    parameter set and its colour-swapped twin share one solve and their reports
    mirror each other bit for bit. When the parameters are their own mirror
    image the fixed point is the symmetric one, ``(1/2, 1/2)``, which the exact
    iteration from ``(r, r)`` never leaves; it is pinned there so that rounding
    cannot split the two groups. ``solve_fixed_point`` on the mirrored
    (rho_blue, rho_red) = (1, 0) corner on its own is orientation dependent;
    go through this function for reported values.
    """
    canonical = _is_canonical(ap)
    ap_c = ap if canonical else color_swap(ap)[0]
    fp_c = solve_fixed_point(ap_c, tol, max_iter)
    theta = fp_c.theta_star if canonical else color_swap(ap_c, fp_c.theta_star)[1]
    if color_swap(ap)[0] == ap:
        theta = ThetaPair(0.5, 0.5, 0.5, 0.5)

    swapped_ap, swapped_theta = color_swap(ap, theta)
    red = exponent_constants_red(ap, theta)
    blue = exponent_constants_red(swapped_ap, swapped_theta)

    try:
        norm = contraction_diagnostic(ap, theta)
    except DegenerateDenominator:
        norm = math.nan
    warnings = ()
    if not norm < 1.0:
        warnings = (f"Jacobian Frobenius norm {norm:.4g} >= 1 at theta*: contraction not certified",)
    fp = FixedPointResult(theta, fp_c.iterations, fp_c.residual, fp_c.converged, warnings)

    derivation = "fixed_point"
    closed = special_case(ap)
    if closed is not None:
        derivation = f"closed_form:{closed.case}"
        _check_closed_form(closed, theta, red, blue)
    return ExponentReport(red, blue, theta, derivation, fp, closed, norm, warnings)


def _check_closed_form(closed, theta, red, blue, atol=CLOSED_FORM_ATOL):
    pairs = [
        ("theta_in", closed.theta_star.theta_in, theta.theta_in),
        ("theta_out", closed.theta_star.theta_out, theta.theta_out),
        ("c_in_red", closed.red.c_in, red.c_in),
        ("c_out_red", closed.red.c_out, red.c_out),
        ("c_in_blue", closed.blue.c_in, blue.c_in),
        ("c_out_blue", closed.blue.c_out, blue.c_out),
    ]
    bad = [(n, a, b) for n, a, b in pairs if not abs(a - b) <= atol]
    if bad:
        detail = ", ".join(f"{n}: closed={a!r} fixed={b!r}" for n, a, b in bad)
        raise ClosedFormMismatch(f"case {closed.case}: {detail}")
