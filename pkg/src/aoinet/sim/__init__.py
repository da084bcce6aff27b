from .engine import (
    FIFO,
    PER_FLOW_SHARE,
    PRIORITY_AOI,
    SCHEDULERS,
    SDM,
    TDM,
    WAITING_ORACLE,
    DeliveryLog,
    Engine,
    Scenario,
    SchedulerSpec,
    SimReport,
    SimulationError,
    per_flow_share_oracle,
    run,
    scheduler_name,
    waiting_oracle_period,
)
from .measure import MeasurementError, aligned_window, decompose_age, measure_aoi, measure_throughput, split_age
from .sources import GREEDY, PACED, TrafficSpec, lda_source_events, periodic_source_events, random_traffic
