"""imfkit: floating-base rigid-body dynamics toolkit.

Computes the impact mitigation factor (the determinant of
I - Lambda Lambda_L^-1, comparing the operational-space inertia of the free
robot against its locked-joint benchmark), the reward formulas used to train
legged-locomotion policies with it, trajectory metrics (mechanical power,
cost of transport, velocity RMSE), and a small adversarial discriminator
with exact, finite-difference-verified gradients.
"""

from .model import (
    ContactFrame,
    JointSpec,
    LinkSpec,
    ModelError,
    PhysicsError,
    RobotModel,
    RobotState,
    SchemaError,
    StateError,
    TreeError,
    bundled_model_names,
    load_bundled_model,
    load_model,
    parse_model,
    serialize_model,
    validate_state,
)
from .dynamics import (
    ContactJacobian,
    ForwardKinematics,
    ImpulseResult,
    MassMatrix,
    SingularConfigurationError,
    UnknownFrameError,
    contact_jacobian,
    forward_kinematics,
    mass_matrix,
    random_state,
    solve_constrained_impulse,
)
from .imf import ImfResult, imf_reward, impact_mitigation, osim, osim_locked
from .oracle import OracleReport, run_oracle_campaign
from .rewards import (
    HANDCRAFTED_TERM_NAMES,
    RewardWeights,
    TrajectorySample,
    combined_amp_reward,
    combined_handcrafted_reward,
    default_weights,
    handcrafted_terms,
    load_weights,
    style_reward,
    task_reward,
)
from .metrics import (
    MetricsReport,
    cost_of_transport,
    mechanical_power,
    metrics_report,
    velocity_rmse,
)
from .discriminator import (
    DiscriminatorNet,
    TrainConfig,
    TrainingDivergedError,
    assemble_amp_pair,
    assemble_amp_state,
    forward,
    gradient_check,
    input_gradient,
    load_checkpoint,
    loss_gradient,
    lsgan_loss,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"
