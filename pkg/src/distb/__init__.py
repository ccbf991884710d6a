"""distb: deterministic simulator for a blockchain-backed SDN-IoT network.

Library layout mirrors the subsystems: `topology` (world and energy model),
`clustering` (head election and rounds), `sdn` (flow tables and flood
mitigation), `blockchain` (transactions, chain, gas, storage), `simulator`
(the event engine and metric batteries), `calibration` (table fits), and
`cli` (the `distb` command).
"""

from .blockchain import (
    Block,
    BlockStore,
    ContractState,
    Ledger,
    Transaction,
    Verdict,
    admit_or_park,
    append_block,
    commit_to_storage,
    expire_pending,
    gas_for,
    make_transaction,
    mine_block,
    select_validator,
    validate_chain,
    verify_transaction,
)
from .calibration import Calibration, load_default, load_reference_tables
from .clustering import Cluster, ClusterSet, run_round, select_cluster_heads, sort_nodes
from .config import AttackConfig, ConsensusConfig, ScenarioConfig, parse_config
from .errors import (
    ConfigError,
    DistbError,
    DuplicateTransactionError,
    EmptyBlockError,
    ExhaustedNetworkError,
    ForkRejectedError,
    NotCommittedError,
    SealInvalidError,
    StorageIntegrityError,
)
from .sdn import (
    ControllerState,
    FlowRule,
    FlowTable,
    Match,
    Packet,
    block_flow,
    detect_flood,
    install_flow_rule,
    match_packet,
)
from .simulator import (
    MetricsBundle,
    generate_traffic,
    inject_attack,
    measure_bandwidth_under_attack,
    measure_cpu_flooding,
    measure_gas,
    measure_response_time,
    measure_throughput,
    recalibrate,
    run_scenario,
)
from .topology import BaseStation, Node, NodeSet, Point3, decay_energy, distance, generate_topology

__version__ = "0.1.0"
