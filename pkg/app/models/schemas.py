"""
Pydantic schemas for run configuration and report validation
"""

from pathlib import Path
from typing import Dict, List, Literal, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.core.config import settings
from app.core.exceptions import ConfigError
from app.models.domain import Sex


def _split_floats(value):
    if isinstance(value, str):
        return [float(v) for v in value.split(",") if v.strip()]
    return value


def _split_ints(value):
    if isinstance(value, str):
        return [int(v) for v in value.split(",") if v.strip()]
    return value


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


# Prior schemas
class PriorSpec(StrictModel):
    coef_sd: float = Field(10.0, gt=0)          # Normal(0, sd) on regression coefficients
    kappa_sd: float = Field(10.0, gt=0)         # Normal(0, sd) on spline coefficients
    iw_df: float = Field(4.0, gt=1)             # Sigma ~ Inv-Wishart(df, scale * I2)
    iw_scale: float = Field(1.0, gt=0)
    omega_inv_shape: float = Field(0.01, gt=0)  # 1/omega ~ Gamma(shape, rate)
    omega_inv_rate: float = Field(0.01, gt=0)
    omega_prior_on: Literal["inverse_scale", "precision"] = "inverse_scale"  # precision puts the Gamma on 1/omega^2
    staleness_sd: float = Field(1.0, gt=0)      # half-normal on rho when sampled
    decay_sd: float = Field(1.0, gt=0)          # half-normal on the gap-decay rate when sampled
    nu_sd: float = Field(10.0, gt=0)            # Normal on nu when sampled


# Chain schemas
class ChainConfig(StrictModel):
    n_chains: int = Field(4, ge=1)
    n_iter: int = Field(10000, ge=2)
    n_burnin: int = Field(4000, ge=0)
    thin: int = Field(1, ge=1)
    seed: Optional[int] = None
    target_accept: float = Field(0.44, gt=0, lt=1)
    adapt_window: int = Field(50, ge=1)
    record_augmentations: bool = False

    @model_validator(mode="after")
    def _burnin_before_end(self):
        if self.n_burnin >= self.n_iter:
            raise ValueError("n_burnin must be smaller than n_iter")
        return self

    @property
    def n_kept(self) -> int:
        return len(range(self.n_burnin, self.n_iter, self.thin))


class ModelOptions(StrictModel):
    model: Literal["jmrmt", "locf"] = "jmrmt"
    include_risk_factor_feature: bool = True
    likelihood_enabled: bool = True
    nu: float = 1.5
    sample_skewness: bool = False
    decay: float = Field(1.0, gt=0)
    estimate_decay: bool = False
    rho_mu: float = Field(0.1, ge=0)
    rho_m: float = Field(0.1, ge=0)
    sample_staleness: bool = False
    spline_degree: int = Field(3, ge=1)
    interior_knots: int = Field(2, ge=0)
    age_center: float = Field(default_factory=lambda: settings.AGE_CENTER)

    @property
    def augment(self) -> bool:
        return self.model == "jmrmt"


def _route_flat(flat: Mapping[str, object], sections: Dict[str, type]) -> Dict[str, Dict[str, object]]:
    """Distribute flat config keys onto the sub-schemas that declare them"""
    routed: Dict[str, Dict[str, object]] = {name: {} for name in sections}
    routed["_top"] = {}
    for key, value in flat.items():
        owner = next((name for name, schema in sections.items() if key in schema.model_fields), "_top")
        routed[owner][key] = value
    return routed


def _config_error(exc: ValidationError, prefix: str = "") -> ConfigError:
    fields = [prefix + ".".join(str(p) for p in err["loc"]) for err in exc.errors()]
    details = "; ".join(f"{f}: {err['msg']}" for f, err in zip(fields, exc.errors()))
    return ConfigError(f"invalid configuration: {details}", fields=fields)


class FitConfig(StrictModel):
    sex: Optional[Sex] = None
    strict: bool = False
    rhat_threshold: float = Field(1.1, gt=1)
    chain: ChainConfig = Field(default_factory=ChainConfig)
    priors: PriorSpec = Field(default_factory=PriorSpec)
    options: ModelOptions = Field(default_factory=ModelOptions)

    @classmethod
    def from_flat(cls, flat: Mapping[str, object]) -> "FitConfig":
        routed = _route_flat(flat, {"chain": ChainConfig, "priors": PriorSpec, "options": ModelOptions})
        try:
            return cls(
                chain=ChainConfig(**routed["chain"]),
                priors=PriorSpec(**routed["priors"]),
                options=ModelOptions(**routed["options"]),
                **routed["_top"],
            )
        except ValidationError as e:
            raise _config_error(e) from e


class SimulationConfig(StrictModel):
    n: int = Field(..., ge=1)
    sex: Sex = Sex.MEN
    seed: Optional[int] = None
    label: str = "simulated"
    baseline_age_min: int = Field(65, ge=40, le=110)
    baseline_age_max: int = Field(69, ge=40, le=110)
    visit_gaps: List[int] = Field(default_factory=lambda: [2, 2, 2, 2])
    censor_age: float = Field(95.0, le=110)
    missing_rate: float = Field(0.0, ge=0, lt=1)
    max_one_switch_per_interval: bool = True
    max_resample: int = Field(1000, ge=1)
    black_freq: Optional[float] = Field(None, ge=0, le=1)
    education_freqs: Optional[List[float]] = None
    params_file: Optional[Path] = None
    spline_degree: int = Field(3, ge=1)
    interior_knots: int = Field(2, ge=0)
    age_center: float = Field(default_factory=lambda: settings.AGE_CENTER)

    @field_validator("visit_gaps", mode="before")
    @classmethod
    def _parse_gaps(cls, value):
        return _split_ints(value)

    @field_validator("education_freqs", mode="before")
    @classmethod
    def _parse_education(cls, value):
        return _split_floats(value)

    @field_validator("visit_gaps")
    @classmethod
    def _positive_gaps(cls, gaps):
        if any(g < 1 for g in gaps):
            raise ValueError("visit gaps must be >= 1 year")
        return gaps

    @field_validator("education_freqs")
    @classmethod
    def _education_simplex(cls, freqs):
        if freqs is not None and (len(freqs) != 3 or abs(sum(freqs) - 1.0) > 1e-6 or min(freqs) < 0):
            raise ValueError("education_freqs must be three non-negative values summing to 1")
        return freqs

    @model_validator(mode="after")
    def _consistent_design(self):
        if self.baseline_age_min > self.baseline_age_max:
            raise ValueError("baseline_age_min must not exceed baseline_age_max")
        if self.baseline_age_max + sum(self.visit_gaps) > 110:
            raise ValueError("visit schedule runs past age 110")
        if self.censor_age <= self.baseline_age_max:
            raise ValueError("censor_age must exceed the baseline age range")
        return self

    @classmethod
    def from_flat(cls, flat: Mapping[str, object]) -> "SimulationConfig":
        try:
            return cls(**flat)
        except ValidationError as e:
            raise _config_error(e) from e


# Report schemas
class ParameterSummary(BaseModel):
    mean: float
    sd: float
    q025: float
    q975: float
    rhat: Optional[float] = None


class FitSummary(BaseModel):
    model: str
    cohort_label: str
    n_subjects: int
    n_chains: int
    n_kept_per_chain: int
    max_rhat: Optional[float]
    converged: bool
    parameters: Dict[str, ParameterSummary]


class HazardComparison(BaseModel):
    n_decedents: int
    proportion_mean_higher: float
    proportion_draws_above_half: float
    n_filtered: int
    filtered_proportion_mean_higher: Optional[float]
    filtered_proportion_draws_above_half: Optional[float]
    zero_med_years_jmrmt: float
    zero_med_years_locf: float
    tie_rule: str = "strict inequality; ties count as not higher"
