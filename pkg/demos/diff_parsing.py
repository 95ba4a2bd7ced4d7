"""
Strict unified-diff parsing
===========================

The purification stage only keeps instances whose patch parses cleanly.
The parser is all-or-nothing: well-formed input yields a structured Diff
whose hunk counts are verified, anything malformed raises an error with a
1-based line number.
"""

from memgov.diffs import DiffParseError, hunk_stats, parse_unified_diff, render_diff

GIT_STYLE = """\
diff --git a/src/renderer/svg.py b/src/renderer/svg.py
index 3f9c2aa..b81d0ce 100644
--- a/src/renderer/svg.py
+++ b/src/renderer/svg.py
@@ -41,6 +41,7 @@ def emit(self, node):
     if node.hidden:
         return
+    node = self.normalize(node)
     path = self.trace(node)
     path.simplify()
-    return path.render()
+    return path.render(precision=self.precision)
     # caller joins fragments
@@ -88,2 +89,3 @@ def trace(self, node):
     box = node.bounds()
+    box = box.clamped(self.viewport)
     return self.walk(box)
diff --git a/docs/renderer.md b/docs/renderer.md
new file mode 100644
index 0000000..9e1a3b2
--- /dev/null
+++ b/docs/renderer.md
@@ -0,0 +1,2 @@
+# Renderer
+Precision is configurable.
"""

diff = parse_unified_diff(GIT_STYLE)
print(f"parsed {len(diff.files)} files")
for f in diff.files:
    flavor = "new file" if f.old_path == "/dev/null" else "modified"
    print(f"  {f.new_path}  ({flavor}, {len(f.hunks)} hunks, metadata={list(f.metadata)})")
    for h in f.hunks:
        kinds = "".join({"context": ".", "add": "+", "del": "-"}[l.kind] for l in h.lines)
        print(f"    @@ -{h.old_start},{h.old_len} +{h.new_start},{h.new_len} @@  [{kinds}]")

print("\nper-file change stats (hunks, added, deleted):")
for path, stats in hunk_stats(diff).items():
    print(f"  {path}: {stats}")

# Rendering is canonical and re-parses to an equal structure.
assert parse_unified_diff(render_diff(diff)) == diff
print("\nparse(render(parse(text))) fixpoint holds")

# Malformed input never yields a partial diff.
BROKEN = "--- a/f\n+++ b/f\n@@ -1,1 +1,2 @@\n-x\n+y\n"  # declares 2 new lines, has 1
try:
    parse_unified_diff(BROKEN)
except DiffParseError as err:
    print(f"\nmalformed diff rejected: {err}")
