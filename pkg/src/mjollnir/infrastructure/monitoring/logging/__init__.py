from .structured import (
    setup_structured_logging, get_logger, set_run_context,
    clear_run_context, log_epoch, log_command, log_artifact
)
