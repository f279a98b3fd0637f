from .state import ViewerState
