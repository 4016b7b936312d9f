"""Private set intersection over replicated, non-colluding databases.

The package layers, bottom to top: exact F_q arithmetic (``field``), the
structural/cost mathematics (``params``), two private retrieval schemes
(``table_scheme`` for capacity-achieving joint retrieval, ``block_scheme``
for fixed message lengths), the intersection protocol (``psi``), a binary
wire protocol with simulated and TCP backends (``transport``), and exact
privacy/reliability audits (``audit``).
"""

from .field import Field, SymbolVector, domain_rng, inner_product, sample_uniform
from .params import (
    AlphaProfile,
    CostLedger,
    InfeasibleError,
    ParamError,
    SchemeParams,
    alpha_profile,
    cost_ledger,
    lspir_cost,
    mm_spir_capacity,
    psi_optimal_cost,
    repetition_factor,
)
from .psi import EntityConfig, IncidenceVector, PsiResult, generate_set, run_psi, to_incidence
from .storage import CommonRandomnessPool, MessageStore
from .table_scheme import ProtocolFault, QueryTable, build_query_table, decode, download_all
from .block_scheme import BlockPlan, decode_blocks, plan_blocks

__all__ = [
    "AlphaProfile",
    "BlockPlan",
    "CommonRandomnessPool",
    "CostLedger",
    "EntityConfig",
    "Field",
    "IncidenceVector",
    "InfeasibleError",
    "MessageStore",
    "ParamError",
    "ProtocolFault",
    "PsiResult",
    "QueryTable",
    "SchemeParams",
    "SymbolVector",
    "alpha_profile",
    "build_query_table",
    "cost_ledger",
    "decode",
    "decode_blocks",
    "domain_rng",
    "download_all",
    "generate_set",
    "inner_product",
    "lspir_cost",
    "mm_spir_capacity",
    "plan_blocks",
    "psi_optimal_cost",
    "repetition_factor",
    "run_psi",
    "sample_uniform",
    "to_incidence",
]

__version__ = "0.1.0"
