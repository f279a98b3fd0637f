from __future__ import annotations

import argparse

from polar.commands.evaluate import register_evaluate
from polar.commands.gen_data import register_gen_data
from polar.commands.inspect_graph import register_inspect_graph
from polar.commands.predict import register_predict
from polar.commands.psp_pretrain import register_psp_pretrain
from polar.commands.train import register_train


def register_all(sub: argparse._SubParsersAction) -> None:
    """Register every subcommand as an independent module."""
    register_gen_data(sub)
    register_psp_pretrain(sub)
    register_train(sub)
    register_evaluate(sub)
    register_predict(sub)
    register_inspect_graph(sub)
