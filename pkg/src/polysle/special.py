"""Gamma and Gauss hypergeometric functions on the real line."""
import math

# Lanczos coefficients, g = 7, n = 9
_G = 7.0
_P = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


class ConvergenceError(ArithmeticError):
    pass


def _is_nonpositive_int(x: float) -> bool:
    return x <= 0 and x == math.floor(x)


def gamma(x: float) -> float:
    """Gamma function via the Lanczos approximation and reflection."""
    x = float(x)
    if _is_nonpositive_int(x):
        raise ValueError(f"gamma has a pole at {x}")
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * gamma(1.0 - x))
    x -= 1.0
    acc = _P[0]
    for i in range(1, len(_P)):
        acc += _P[i] / (x + i)
    t = x + _G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (x + 0.5) * math.exp(-t) * acc


def rgamma(x: float) -> float:
    """1 / gamma(x), zero at the poles."""
    if _is_nonpositive_int(float(x)):
        return 0.0
    return 1.0 / gamma(x)


def hyp2f1_series(a, b, c, s, tol=1e-17, max_terms=200_000) -> float:
    """Plain Gauss series, summed until the terms stop mattering."""
    if _is_nonpositive_int(c):
        raise ValueError("c must not be a non-positive integer")
    total = 1.0
    term = 1.0
    quiet = 0
    for k in range(max_terms):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * s
        total += term
        if term == 0.0:
            return total
        if abs(term) <= tol * abs(total):
            quiet += 1
            if quiet >= 2:
                return total
        else:
            quiet = 0
    raise ConvergenceError(f"2F1({a}, {b}; {c}; {s}) did not converge in {max_terms} terms")


_NEAR_INT = 0.05


def hyp2f1(a: float, b: float, c: float, s: float, max_terms: int = 200_000) -> float:
    """Gauss hypergeometric function F(a, b; c; s) for 0 <= s < 1.

    Above s = 1/2 the argument is reflected to 1 - s unless c - a - b lies
    within ``_NEAR_INT`` of an integer. There the two connection terms carry
    gamma poles that cancel, so the direct series is summed instead.
    """
    if not 0.0 <= s < 1.0:
        raise ValueError("s must lie in [0, 1)")
    if _is_nonpositive_int(c):
        raise ValueError("c must not be a non-positive integer")
    if s == 0.0:
        return 1.0
    cab = c - a - b
    if s <= 0.5 or abs(cab - round(cab)) < _NEAR_INT:
        return hyp2f1_series(a, b, c, s, max_terms=max_terms)
    u = 1.0 - s
    gc = gamma(c)
    first = gc * gamma(cab) * rgamma(c - a) * rgamma(c - b)
    second = gc * gamma(-cab) * rgamma(a) * rgamma(b)
    out = 0.0
    if first != 0.0:
        out += first * hyp2f1_series(a, b, 1.0 - cab, u, max_terms=max_terms)
    if second != 0.0:
        out += second * u ** cab * hyp2f1_series(c - a, c - b, 1.0 + cab, u, max_terms=max_terms)
    return out
