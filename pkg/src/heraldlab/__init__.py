"""Numerical workbench for heralded and flagged-switch quantum channels.

Library layout:

- qcore: density operators, tensor-factor bookkeeping, deterministic RNG.
- channels: Kraus channels, flag sectors, heralded/switch/erasure families.
- entropy: von Neumann entropies, mutual information, continuity bounds.
- holevo: ensemble optimization of Holevo information and its potential.
- esq: squashed-entanglement upper bounds and separable approximation.
- bounds: capacity-inequality harnesses producing slack/verdict reports.
- games: nonlocal game values, classical (exact) and see-saw (lower bound).
- experiments / render / cli: registry, cached artifacts, deterministic SVG.
"""

__version__ = "0.1.0"

from .bounds import (
    BoundReport,
    HeraldBlock,
    HeraldSpec,
    blocksize_bound,
    blocksize_coefficient,
    cor42_bound,
    cor43_bound,
    cor53_bound,
    correction_term,
    herald_count_check,
    hypothesis_margin,
    post_selected_capacity,
    thm33_correction,
    thm41_bound,
    thm51_compare,
)
from .channels import (
    KrausChannel,
    apply,
    binomial_mixture_check,
    choi_distance,
    choi_matrix,
    dephasing_channel,
    depolarizing_channel,
    erasure_channel,
    flagged_switch_channel,
    heralded_channel,
    identity_channel,
    parse_channel_expr,
    product_channel,
    random_channel,
    resolve_channel,
    tensor_channels,
    trivial_channel,
)
from .entropy import (
    alicki_fannes_bound,
    binary_entropy,
    conditional_entropy,
    conditional_mutual_information,
    entropy_of_spectrum,
    entropy_report,
    mutual_information,
    von_neumann_entropy,
)
from .esq import (
    EsqOpts,
    EsqUpperBound,
    SeparableApprox,
    SepOpts,
    esq_upper,
    esq_upper_through_channel,
    faithfulness_consistency,
    heralded_averaging_check,
    load_state_suite,
    monogamy_harness,
    parse_state_expr,
    ppt_distance_lower,
    separable_approx,
    transfer_extension,
)
from .experiments import (
    ExperimentConfig,
    ResultRecord,
    config_fingerprint,
    load_config,
    run,
)
from .games import (
    Game,
    GameOpts,
    GameValueReport,
    QuantumStrategy,
    chsh_game,
    classical_value,
    entangled_value_lower,
    load_game,
    make_game,
    monogamy_game_bound,
    multi_bob_values,
    resolve_game,
    save_game,
)
from .holevo import (
    ChiPotSpec,
    CQEnsemble,
    HolevoEstimate,
    HolevoOpts,
    chi_pot,
    holevo_of_ensemble,
    maximize_holevo,
    maximize_holevo_auto,
    maximize_holevo_flagged,
    regularization_probe,
)
from .qcore import (
    DensityOperator,
    PureState,
    SpaceShape,
    basis_ket,
    bell_state,
    content_fingerprint,
    ghz_state,
    max_mixed,
    partial_trace,
    permute_factors,
    product_state,
    purification,
    random_density,
    tensor,
    trace_distance,
    werner_state,
)
from .render import render_svg, save_svg, write_atomic
