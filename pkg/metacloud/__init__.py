import logging
logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

__version__ = "0.1.0"

from .config import ExperimentConfig, load_config
from .database import Database
from .manager import Manager
from .trial import Trial
from .record import RunRecord, GateRecord
