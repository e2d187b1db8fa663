from .prometheus import (
    REGISTRY, TRAIN_STEPS_TOTAL, SAMPLES_PROCESSED_TOTAL, TRAIN_LOSS,
    BEST_VAL_LOSS, EPOCH_DURATION, record_step, record_epoch,
    write_metrics_textfile, get_registry
)
