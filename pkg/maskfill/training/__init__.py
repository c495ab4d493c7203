from .config import TrainConfig, REGIMES
from .checkpoint import Checkpoint, save_checkpoint, load_checkpoint
from .inference import cascade_forward, hallucinate
from .run import RunDirectory, SnapshotWriter, METRICS_COLUMNS
from .service import Trainer, train, train_cascaded, train_progressive
