"""
神经网络层与主干网络
"""

from mjollnir.core.nn.layers import (
    BlockParams,
    InceptionDWParams,
    ParamGroup,
    SEParams,
    SeparableParams,
    depthwise_separable,
    drop_path,
    inception_dwconv,
    inception_split,
    mjolnir_block,
    pointwise_group_conv,
    se_block,
)
from mjollnir.core.nn.backbone import (
    ModelConfig,
    ModelParams,
    StageParams,
    count_params,
    drop_path_schedule,
    forward,
    init_params,
    no_decay_names,
    predict_density,
)
from mjollnir.core.nn.checkpoint import (
    Checkpoint,
    OptimizerSnapshot,
    load_checkpoint,
    read_header,
    save_checkpoint,
)

__all__ = [
    "BlockParams",
    "InceptionDWParams",
    "ParamGroup",
    "SEParams",
    "SeparableParams",
    "depthwise_separable",
    "drop_path",
    "inception_dwconv",
    "inception_split",
    "mjolnir_block",
    "pointwise_group_conv",
    "se_block",
    "ModelConfig",
    "ModelParams",
    "StageParams",
    "count_params",
    "drop_path_schedule",
    "forward",
    "init_params",
    "no_decay_names",
    "predict_density",
    "Checkpoint",
    "OptimizerSnapshot",
    "load_checkpoint",
    "read_header",
    "save_checkpoint",
]
