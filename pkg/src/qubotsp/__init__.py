"""TSP solving via QUBO/Ising encodings.

Four solver routes over one encoding: simulated annealing, simulated
quantum annealing (Trotter replicas), exact Schrodinger-evolution
annealing for tiny models, and gradient descent on a relaxed QUBO loss
whose edge heatmap guides a restart-based local search.  Exact oracles
(brute force, Held-Karp, exhaustive QUBO scan) back every gap figure.
"""

from .instances import (
    TspInstance,
    euclidean_distances,
    generate_instances,
    load_instance,
    load_tsplib,
    random_instance,
    save_instance,
)
from .qubo import (
    InvalidEncoding,
    IsingModel,
    QuboModel,
    Tour,
    bits_to_index,
    build_tsp_qubo,
    constraint_value,
    decode_assignment,
    default_penalty,
    encode_tour,
    index_to_bits,
    ising_energy,
    qubo_energy,
    to_ising,
    tour_cost,
)
from .oracle import (
    OracleResult,
    brute_force_tsp,
    exhaustive_qubo_min,
    gap_percent,
    gray_code_checkpoints,
    held_karp,
)
from .annealers import (
    SaSchedule,
    SolveResult,
    SqaSchedule,
    simulated_annealing,
    simulated_quantum_annealing,
)
from .schrodinger import (
    AnnealSchedule,
    EvolutionTrace,
    StateVector,
    build_potential,
    evolve,
    sample_assignment,
)
from .heatmap import (
    DivergenceError,
    EncoderWeights,
    Heatmap,
    HeatmapConfig,
    SoftAssignment,
    decode_heatmap,
    encoder_gradients,
    load_heatmap,
    optimize_heatmap,
    save_heatmap,
    soft_qubo_loss,
)
from .search import (
    NoImprovement,
    SearchParams,
    SearchResult,
    candidate_scores,
    expand_tour,
    guided_search,
)
from .bench import (
    BenchConfig,
    BenchRow,
    ReferenceRow,
    format_table,
    load_reference_rows,
    run_benchmark,
)

__version__ = "0.1.0"
