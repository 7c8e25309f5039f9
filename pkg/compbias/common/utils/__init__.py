from .logging_service import LoggerService, get_logger

__all__ = ["LoggerService", "get_logger"]
