"""Multimodal dialogue simulator: screens, references, actions, datasets."""

from .state import (  # noqa: F401
    Action,
    ActionArg,
    DialogueState,
    SimulationError,
    apply_action,
    compare_action,
    generate_screen,
    new_dialogue_state,
    single_arg_action,
)
from .expressions import (  # noqa: F401
    ReferringExpression,
    choose_reference,
    is_unique_reference,
    match_indices,
)
from .generate import (  # noqa: F401
    DatasetConfig,
    Dialogue,
    TurnRecord,
    agent_response,
    generate_dialogue,
    replay_dialogue,
    simulate_dataset,
)
from .checker import CheckFailure, check_dataset, check_example  # noqa: F401
