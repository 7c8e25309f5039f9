import sys

from compbias.common.utils.logging_service import LoggerService
from compbias.report_cli import cli_main

# Initialize global logger
logger_service = LoggerService("controller")
logger_service.install_exception_hook()
logger = logger_service.get_logger()

if __name__ == "__main__":
    try:
        sys.exit(cli_main(sys.argv[1:]))
    except KeyboardInterrupt:
        logger.info("Stopped by user.")
        sys.exit(130)
