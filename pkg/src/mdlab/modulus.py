"""The deformation parameter b and its derived constants."""

from __future__ import annotations

from dataclasses import dataclass, field
import cmath


@dataclass(frozen=True)
class Modulus:
    """Deformation parameter b with the constants every formula needs.

    Validated regimes: real b in (0, 1], or b = exp(i*theta) with
    0 <= theta < pi/2 (the "strong coupling" circle).
    """

    b: complex
    Q: complex = field(init=False)
    q: complex = field(init=False)
    qtilde: complex = field(init=False)
    qtilde_res: complex = field(init=False)
    zeta: complex = field(init=False)

    def __post_init__(self) -> None:
        b = complex(self.b)
        if b.real <= 0:
            raise ValueError("Re(b) must be positive")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "Q", b + 1.0 / b)
        object.__setattr__(self, "q", cmath.exp(1j * cmath.pi * b * b))
        # Two sign conventions coexist in the source material; both are kept.
        # qtilde is used for the dual Weyl relations, qtilde_res inside the
        # residue/reflection formulas.
        object.__setattr__(self, "qtilde", cmath.exp(1j * cmath.pi / (b * b)))
        object.__setattr__(self, "qtilde_res", cmath.exp(-1j * cmath.pi / (b * b)))
        object.__setattr__(
            self,
            "zeta",
            cmath.exp(1j * cmath.pi / 4 + 1j * cmath.pi / 12 * (b * b + 1.0 / (b * b))),
        )

    @property
    def is_real(self) -> bool:
        return abs(self.b.imag) < 1e-14

    @property
    def zeta_bar(self) -> complex:
        """exp(-i pi/4 - i pi (b^2 + b^-2)/12); equals conj(zeta) for real b."""
        b2 = self.b * self.b
        return cmath.exp(-1j * cmath.pi / 4 - 1j * cmath.pi / 12 * (b2 + 1.0 / b2))

    def q_number(self, x: complex) -> complex:
        """[x]_q = sin(pi b^2 x) / sin(pi b^2)."""
        b2 = self.b * self.b
        return cmath.sin(cmath.pi * b2 * x) / cmath.sin(cmath.pi * b2)

    @classmethod
    def from_theta(cls, theta: float) -> "Modulus":
        """Modulus on the unit circle, b = exp(i*theta)."""
        return cls(cmath.exp(1j * theta))
