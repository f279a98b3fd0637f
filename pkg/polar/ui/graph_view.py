from __future__ import annotations

from typing import Optional

import streamlit as st

from polar.dialogue import SPEAKER
from polar.ui.plots import alpha_series, graph_figure, plot_alpha_trajectory
from polar.ui.state import ViewerState
from polar.ui.text import graph_dump, graph_to_dict


def _span_rows(dialogue) -> list:
    rows = []
    for s in dialogue.roles:
        words = dialogue.utterances[s.utt].tokens[s.start : s.end + 1]
        rows.append({"role": s.role, "utt": s.utt, "start": s.start, "end": s.end, "text": " ".join(words)})
    return rows


def render_sidebar(state: ViewerState) -> None:
    st.sidebar.header("POLar inspector")
    ckpt = st.sidebar.text_input("Checkpoint (.npz)", value="runs/polar/model.npz")
    if st.sidebar.button("Load checkpoint"):
        state.open_checkpoint(ckpt)
    corpus = st.sidebar.text_input("Corpus (.jsonl)", value="data/dev.jsonl")
    if st.sidebar.button("Load corpus"):
        state.open_corpus(corpus)
    if state.corpus is not None and len(state.corpus):
        idx = st.sidebar.number_input("Dialogue", min_value=0, max_value=len(state.corpus) - 1, value=state.index, step=1)
        state.select(int(idx))
    st.sidebar.markdown("---")
    if state.last_message:
        st.sidebar.caption(state.last_message)


def render_viewer(state: ViewerState) -> Optional[dict]:
    """Main panel; returns the graph payload for export, or None when nothing is loaded."""
    if not state.ready:
        st.info("Load a checkpoint and a corpus from the sidebar.")
        return None

    seq, graph, labels, pred = state.analyze()
    gold = state.current()

    st.subheader(f"Dialogue {gold.dialogue_id}")
    for i, u in enumerate(gold.utterances):
        mark = "  ← predicate" if i == gold.predicate[0] else ""
        st.markdown(f"**spk{u.speaker}**: {' '.join(u.tokens)}{mark}")

    nodes = [
        {"node": i, "kind": n.kind, "surface": n.surface, "utt": n.utt, "gold": seq.labels[i], "pred": labels[i]}
        for i, n in enumerate(seq.nodes)
    ]
    c_nodes, c_spans = st.columns([1.2, 1], gap="large")
    with c_nodes:
        st.caption("Linearized nodes")
        st.dataframe(nodes, use_container_width=True, hide_index=True)
    with c_spans:
        st.caption("Gold spans")
        st.dataframe(_span_rows(gold), use_container_width=True, hide_index=True)
        st.caption("Predicted spans")
        st.dataframe(_span_rows(pred), use_container_width=True, hide_index=True)

    st.pyplot(graph_figure(seq, graph), use_container_width=True)
    n_speakers = sum(1 for n in seq.nodes if n.kind == SPEAKER)
    st.caption(f"K={seq.K} nodes ({n_speakers} speaker nodes), edge mode {graph.mode}")

    with st.expander("Text dump"):
        st.code("\n".join(graph_dump(seq, graph)))

    if len(alpha_series(state.metrics)):
        with st.expander("Alpha trajectory"):
            st.pyplot(plot_alpha_trajectory(state.metrics), use_container_width=True)

    return graph_to_dict(seq, graph)
