from src.networks.cascade import (
    CascadeOutput,
    CascadeWeights,
    ScalePyramid,
    build_pyramid,
    cascade_forward,
    inpaint_forward,
    synthesis_forward,
    transform_multiscale,
    transform_multistep,
)
from src.networks.checkpoint import (
    Checkpoint,
    CheckpointError,
    IncompatibleCheckpointError,
    read_checkpoint,
    write_checkpoint,
)
from src.networks.params import ParameterSet
from src.networks.recurrent import (
    ConvLSTMLayer,
    ConvLSTMState,
    DiscriminatorWeights,
    GeneratorWeights,
    convlstm_step,
    discriminator_forward,
    generator_forward,
    interpolate_frame,
    run_branch,
)

__all__ = [
    "CascadeOutput",
    "CascadeWeights",
    "Checkpoint",
    "CheckpointError",
    "ConvLSTMLayer",
    "ConvLSTMState",
    "DiscriminatorWeights",
    "GeneratorWeights",
    "IncompatibleCheckpointError",
    "ParameterSet",
    "ScalePyramid",
    "build_pyramid",
    "cascade_forward",
    "convlstm_step",
    "discriminator_forward",
    "generator_forward",
    "inpaint_forward",
    "interpolate_frame",
    "read_checkpoint",
    "run_branch",
    "synthesis_forward",
    "transform_multiscale",
    "transform_multistep",
    "write_checkpoint",
]
