from .baselines import (FixedGridController, RandomController, RateController, RLController,
                        baseline_fixed_grid, baseline_rate)
from .session import (ChunkOutcome, PreparedVideo, Session, SessionConfig, SessionExhausted, SessionLog,
                      TrainingEnv, run_session)
from .traces import BandwidthTrace, StallError, ViewpointTrace, download_time, predict_viewpoint, wrap_yaw
