"""
Parameter containers for the three submodels and their flat path encoding
"""

from dataclasses import dataclass, replace
from typing import Dict, Mapping, Optional

import numpy as np

from app.models.domain import Sex

BETA_NAMES = (
    "intercept", "edu_hs", "edu_morehs", "black",
    "age", "age_edu_hs", "age_edu_morehs", "age_black",
)
BETA_H_NAMES = ("edu_hs", "edu_morehs", "black")
N_ALPHA = 8
DEFAULT_NU = 1.5
DEFAULT_RHO = 0.1


@dataclass(frozen=True)
class LongitudinalParams:
    beta: np.ndarray          # 8 fixed effects, order of BETA_NAMES
    beta_m: float             # medication x age slope
    omega: float              # skew-normal scale
    sigma: np.ndarray         # 2x2 random-effects covariance
    nu: float = DEFAULT_NU    # skew-normal shape

    def __post_init__(self):
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=float))


@dataclass(frozen=True)
class MedicationParams:
    alpha: np.ndarray         # alpha1..alpha8
    decay: float = 1.0        # gap-decay rate, per year

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))


@dataclass(frozen=True)
class HazardParams:
    kappa0: float
    kappa: np.ndarray         # one coefficient per B-spline basis function
    beta_h: np.ndarray        # order of BETA_H_NAMES
    lambda_mu: float
    lambda_m: float
    rho_mu: float = DEFAULT_RHO
    rho_m: float = DEFAULT_RHO

    def __post_init__(self):
        object.__setattr__(self, "kappa", np.asarray(self.kappa, dtype=float))
        object.__setattr__(self, "beta_h", np.asarray(self.beta_h, dtype=float))


@dataclass(frozen=True)
class Parameters:
    longitudinal: LongitudinalParams
    medication: MedicationParams
    hazard: HazardParams

    def to_flat(self) -> Dict[str, float]:
        """Flat mapping keyed by parameter path, in a stable order"""
        lon, med, haz = self.longitudinal, self.medication, self.hazard
        flat: Dict[str, float] = {}
        for name, value in zip(BETA_NAMES, lon.beta):
            flat[f"longitudinal.beta.{name}"] = float(value)
        flat["longitudinal.beta_m"] = float(lon.beta_m)
        flat["longitudinal.omega"] = float(lon.omega)
        flat["longitudinal.nu"] = float(lon.nu)
        flat["longitudinal.sigma.b0b0"] = float(lon.sigma[0, 0])
        flat["longitudinal.sigma.b0b1"] = float(lon.sigma[0, 1])
        flat["longitudinal.sigma.b1b1"] = float(lon.sigma[1, 1])
        for k, value in enumerate(med.alpha, start=1):
            flat[f"medication.alpha{k}"] = float(value)
        flat["medication.decay"] = float(med.decay)
        flat["hazard.kappa0"] = float(haz.kappa0)
        for d, value in enumerate(haz.kappa, start=1):
            flat[f"hazard.kappa{d}"] = float(value)
        for name, value in zip(BETA_H_NAMES, haz.beta_h):
            flat[f"hazard.beta_h.{name}"] = float(value)
        flat["hazard.lambda_mu"] = float(haz.lambda_mu)
        flat["hazard.lambda_m"] = float(haz.lambda_m)
        flat["hazard.rho_mu"] = float(haz.rho_mu)
        flat["hazard.rho_m"] = float(haz.rho_m)
        return flat

    @classmethod
    def from_flat(cls, flat: Mapping[str, float], template: "Parameters") -> "Parameters":
        """Rebuild parameters from a (possibly partial) flat mapping over a template"""
        values = template.to_flat()
        unknown = set(flat) - set(values)
        if unknown:
            raise KeyError(f"unknown parameter paths: {sorted(unknown)}")
        values.update({k: float(v) for k, v in flat.items()})

        n_kappa = len(template.hazard.kappa)
        sigma = np.array([
            [values["longitudinal.sigma.b0b0"], values["longitudinal.sigma.b0b1"]],
            [values["longitudinal.sigma.b0b1"], values["longitudinal.sigma.b1b1"]],
        ])
        return cls(
            longitudinal=LongitudinalParams(
                beta=[values[f"longitudinal.beta.{n}"] for n in BETA_NAMES],
                beta_m=values["longitudinal.beta_m"],
                omega=values["longitudinal.omega"],
                sigma=sigma,
                nu=values["longitudinal.nu"],
            ),
            medication=MedicationParams(
                alpha=[values[f"medication.alpha{k}"] for k in range(1, N_ALPHA + 1)],
                decay=values["medication.decay"],
            ),
            hazard=HazardParams(
                kappa0=values["hazard.kappa0"],
                kappa=[values[f"hazard.kappa{d}"] for d in range(1, n_kappa + 1)],
                beta_h=[values[f"hazard.beta_h.{n}"] for n in BETA_H_NAMES],
                lambda_mu=values["hazard.lambda_mu"],
                lambda_m=values["hazard.lambda_m"],
                rho_mu=values["hazard.rho_mu"],
                rho_m=values["hazard.rho_m"],
            ),
        )

    def with_longitudinal(self, **changes) -> "Parameters":
        return replace(self, longitudinal=replace(self.longitudinal, **changes))

    def with_medication(self, **changes) -> "Parameters":
        return replace(self, medication=replace(self.medication, **changes))

    def with_hazard(self, **changes) -> "Parameters":
        return replace(self, hazard=replace(self.hazard, **changes))


# Published posterior means by sex, used as simulator defaults.
# The reported 1/omega is a precision on the variance scale, hence omega = 1/sqrt(.).
_REPORTED = {
    Sex.MEN: {
        "beta": [159.32, 2.4280, 0.8210, -0.7191, -3.1412, 0.8157, 1.0913, 1.4179],
        "beta_m": -1.0119,
        "precision": 0.0017,
        "alpha": [-1.0330, 5.4180, 0.1414, -0.1482, -0.1850, 1.6337, -0.0053, -0.0124],
        "beta_h": [0.2610, 0.1567, 0.3836],
        "lambda_mu": -0.033,
        "lambda_m": -0.688,
        # chosen so the baseline hazard is about 0.02/year at a typical mean trajectory
        "kappa0": 1.04,
    },
    Sex.WOMEN: {
        "beta": [173.90, 4.9240, 9.1460, -2.2550, -1.8430, 1.0390, 1.0850, 0.2648],
        "beta_m": -0.1630,
        "precision": 0.0016,
        "alpha": [-2.4300, 7.9650, 0.0623, -0.0977, -1.4630, 2.0390, 0.0043, -0.0262],
        "beta_h": [0.3807, 0.2234, 0.1151],
        "lambda_mu": -0.025,
        "lambda_m": 0.047,
        "kappa0": 0.50,
    },
}

DEFAULT_SIGMA = np.array([[400.0, 0.0], [0.0, 1.0]])


def default_parameters(sex: Sex = Sex.MEN, n_basis: int = 4, kappa: Optional[np.ndarray] = None) -> Parameters:
    """Sex-specific default parameters with an age-increasing log baseline hazard"""
    ref = _REPORTED[Sex(sex)]
    if kappa is None:
        kappa = np.linspace(0.0, 1.0, n_basis)
    return Parameters(
        longitudinal=LongitudinalParams(
            beta=ref["beta"],
            beta_m=ref["beta_m"],
            omega=1.0 / np.sqrt(ref["precision"]),
            sigma=DEFAULT_SIGMA.copy(),
            nu=DEFAULT_NU,
        ),
        medication=MedicationParams(alpha=ref["alpha"], decay=1.0),
        hazard=HazardParams(
            kappa0=ref["kappa0"],
            kappa=kappa,
            beta_h=ref["beta_h"],
            lambda_mu=ref["lambda_mu"],
            lambda_m=ref["lambda_m"],
        ),
    )


def zero_parameters(n_basis: int = 4, omega: float = 1.0) -> Parameters:
    """All regression coefficients zero, identity covariance"""
    return Parameters(
        longitudinal=LongitudinalParams(beta=np.zeros(len(BETA_NAMES)), beta_m=0.0,
                                        omega=omega, sigma=np.eye(2)),
        medication=MedicationParams(alpha=np.zeros(N_ALPHA)),
        hazard=HazardParams(kappa0=0.0, kappa=np.zeros(n_basis), beta_h=np.zeros(len(BETA_H_NAMES)),
                            lambda_mu=0.0, lambda_m=0.0),
    )
