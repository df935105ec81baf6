"""
Logging System Setup
Centralized logging configuration for simulations and studies
"""
import logging
from datetime import datetime
from pathlib import Path


def setup_logging(log_dir="logs", log_level=logging.INFO):
    """
    Initialize the logging system.
    
    Creates the log directory if needed and configures both file and console logging.
    Calling it twice does not stack handlers.
    
    Args:
        log_dir: Directory for log files (default: "logs")
        log_level: Logging level (default: logging.INFO)
    """
    log_dir = Path(log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)
    
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    log_file = log_dir / "latest.log"
    archive_file = log_dir / f"run_{timestamp}.log"
    
    # Archive the previous run's log
    if log_file.exists():
        try:
            log_file.rename(archive_file)
        except OSError as e:
            print(f"Warning: Could not archive previous log: {e}")
    
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    
    file_handler = logging.FileHandler(log_file, encoding='utf-8')
    console_handler = logging.StreamHandler()
    # Console shows warnings and above only
    console_handler.setLevel(logging.WARNING)
    
    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    for handler in (file_handler, console_handler):
        handler.setFormatter(formatter)
        root.addHandler(handler)
    root.setLevel(log_level)
    
    logging.info("=" * 60)
    logging.info("Stochastic Variational Wave Lab - Logging System Initialized")
    logging.info(f"Log file: {log_file}")
    logging.info(f"Log level: {logging.getLevelName(log_level)}")
    logging.info("=" * 60)


def get_logger(name):
    """
    Get a logger for a specific module.
    
    Args:
        name: Logger name (typically __name__)
        
    Returns:
        logging.Logger instance
    
    Example:
        logger = get_logger(__name__)
        logger.info("Starting ensemble")
        logger.warning("Step size above transport CFL guideline")
    """
    return logging.getLogger(name)


def log_exception(logger, exception, context=""):
    """
    Log an exception with full traceback.
    
    Args:
        logger: Logger instance
        exception: Exception object
        context: Additional context string
    """
    if context:
        logger.exception(f"{context}: {exception}")
    else:
        logger.exception(f"Exception occurred: {exception}")


def log_run_start(logger, subcommand, config):
    """Log the start of a subcommand run"""
    logger.info("=" * 40)
    logger.info(f"RUN START - {subcommand}")
    logger.info(f"N={config.N} nu={config.nu} T={config.T} dt={config.dt} seed={config.seed}")
    logger.info(f"Speed: {config.speed.preset} {config.speed.params}")
    logger.info(f"Sigma: {config.sigma.preset} {config.sigma.params}")
    logger.info("=" * 40)


def log_run_end(logger, subcommand, passed, failed_checks=0):
    """Log the conclusion of a subcommand run"""
    status = "PASS" if passed else f"FAIL ({failed_checks} failed checks)"
    logger.info("=" * 40)
    logger.info(f"RUN END - {subcommand} - {status}")
    logger.info("=" * 40)


def log_stopping_time(logger, t, k, energy):
    """Log a stopping-time crossing"""
    logger.info(f"Stopping time reached at t={t:.6g}: energy {energy:.6g} >= k={k:g}")


def log_performance(logger, operation, duration_ms):
    """
    Log performance metrics.
    
    Args:
        logger: Logger instance
        operation: Name of operation
        duration_ms: Duration in milliseconds
    """
    if duration_ms > 60_000:
        logger.warning(f"Performance: {operation} took {duration_ms:.2f}ms (SLOW)")
    else:
        logger.debug(f"Performance: {operation} took {duration_ms:.2f}ms")


def log_report_written(logger, report_file):
    """Log report persistence"""
    logger.info(f"Report written to: {report_file}")
