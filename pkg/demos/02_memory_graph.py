"""Session memory: the editing-history graph and turn folding.

Run a few turns, one of them needing several attempts, and watch what the
planner's persistent memory keeps (intent + accepted path) versus what it
drops (per-attempt tool records, which only reach the debug sidecar).
"""

from editloop import EditSession, SessionConfig
from editloop.backends import SymbolicBackend
from editloop.errors import BackendRejected
from editloop.history import render_memory, serialize_persistent_memory
from editloop.synth import SessionSpec, synth_initial_state


class FlakyBackend:
    scope = "patch"

    def __init__(self, failures):
        self.failures = failures
        self.inner = SymbolicBackend()

    def edit(self, request):
        if self.failures > 0:
            self.failures -= 1
            raise BackendRejected("transient backend hiccup")
        return self.inner.edit(request)


scene = synth_initial_state(11, SessionSpec(seed=11, canvas=(128, 128)))
target = scene.objects[0].object_id
print("scene objects:", scene.ids())

smooth = EditSession(scene, SessionConfig(feather_sigma=0.0))
smooth.run_turn(f"adjust({target}, color=navy)")

bumpy = EditSession(scene, SessionConfig(feather_sigma=0.0, retry_budget=5),
                    backend=FlakyBackend(4))
outcome = bumpy.run_turn(f"adjust({target}, color=navy)")
print(f"bumpy turn committed after {outcome.attempts} attempts; "
      f"{len(bumpy.debug.records)} records went to the debug sidecar")

print("persistent memory identical despite the retries:",
      serialize_persistent_memory(smooth.graph)
      == serialize_persistent_memory(bumpy.graph))

print("\nplanner memory document:")
print(render_memory(bumpy.graph))

bumpy.undo()
branch = bumpy.run_turn(f"adjust({target}, color=lime)")
children = [n.uri[:12] for n in bumpy.graph.nodes.values()
            if n.parent_uri == bumpy.graph.root_uri()]
print("\nafter undo + re-edit, the root has two branches:", children)
print("new head:", branch.final_uri[:12], "…")
