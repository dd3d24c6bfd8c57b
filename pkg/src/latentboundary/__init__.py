"""Hard-label black-box boundary attacks in input space or the latent space
of a pluggable generator, with exact query accounting, synthetic analytic
oracles, a brute-force target sampler, and a budget-sweep harness."""

from .core import BoundsBox, UNIT_BOX, clamp_to_bounds, l2_distance, make_rng, mse, sample_unit_sphere
from .engine import AttackConfig, AttackTrace, run_attack
from .errors import (
    BudgetExhausted,
    ContractViolation,
    EncodingInvalid,
    InvalidEndpoints,
    ProtocolError,
    StepSearchFailed,
)
from .latent import LatentAttackJob, LatentAttackResult, LatentNormalizer, image_space_attack, latent_attack
from .oracles import (
    ClassifierOracle,
    DecisionFn,
    EncoderOracle,
    GeneratorOracle,
    QueryLedger,
    decide,
    decide_latent,
)
from .synthetic import SyntheticSuite, make_suite

__version__ = "0.1.0"
