from __future__ import annotations

import json

import streamlit as st

from polar.ui import ViewerState
from polar.ui.graph_view import render_sidebar, render_viewer

st.set_page_config(page_title="POLar inspector", layout="wide")

if "viewer" not in st.session_state:
    st.session_state.viewer = ViewerState()

viewer: ViewerState = st.session_state.viewer

render_sidebar(viewer)
payload = render_viewer(viewer)

if payload is not None:
    st.sidebar.download_button(
        "Download graph JSON",
        data=json.dumps(payload, indent=2),
        file_name=f"{payload['dialogue_id']}_graph.json",
        mime="application/json",
    )
st.sidebar.markdown("---")
st.sidebar.caption("Inference only. Training runs through python -m polar.")
