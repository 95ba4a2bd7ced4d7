"""Deterministic corpus of real unified diffs for parser tests.

Plain diffs come from difflib.unified_diff over seeded synthetic file
pairs (difflib is an independent producer of the format); git-style diffs
add extended headers, new/deleted files, renames, and no-newline markers.
"""

from __future__ import annotations

import difflib
import random

_WORDS = (
    "alpha bravo charlie delta echo foxtrot golf hotel india juliet kilo lima "
    "mike november oscar papa quebec romeo sierra tango uniform victor whiskey"
).split()


def _random_lines(rng: random.Random, n: int) -> list[str]:
    return [" ".join(rng.choices(_WORDS, k=rng.randint(1, 6))) for _ in range(n)]


def _edit(rng: random.Random, lines: list[str]) -> list[str]:
    out = list(lines)
    for _ in range(rng.randint(1, 6)):
        op = rng.choice(("insert", "delete", "replace"))
        if op == "insert" or not out:
            out.insert(rng.randint(0, len(out)), " ".join(rng.choices(_WORDS, k=3)))
        elif op == "delete":
            out.pop(rng.randrange(len(out)))
        else:
            out[rng.randrange(len(out))] = " ".join(rng.choices(_WORDS, k=4))
    return out


def make_plain_diff(rng: random.Random) -> str:
    path = f"src/{rng.choice(_WORDS)}/{rng.choice(_WORDS)}.py"
    old = _random_lines(rng, rng.randint(5, 40))
    new = _edit(rng, old)
    while new == old:
        new = _edit(rng, old)
    lines = list(
        difflib.unified_diff(old, new, fromfile=f"a/{path}", tofile=f"b/{path}", lineterm="")
    )
    return "\n".join(lines) + "\n"


def make_git_diff(rng: random.Random) -> str:
    """Plain hunks wrapped in git headers with an index line."""
    path = f"lib/{rng.choice(_WORDS)}.c"
    old = _random_lines(rng, rng.randint(4, 20))
    new = _edit(rng, old)
    while new == old:
        new = _edit(rng, old)
    body = "\n".join(
        difflib.unified_diff(old, new, fromfile=f"a/{path}", tofile=f"b/{path}", lineterm="")
    )
    header = f"diff --git a/{path} b/{path}\nindex {rng.randrange(16**7):07x}..{rng.randrange(16**7):07x} 100644\n"
    return header + body + "\n"


def make_new_file_diff(rng: random.Random) -> str:
    path = f"docs/{rng.choice(_WORDS)}.txt"
    lines = _random_lines(rng, rng.randint(1, 5))
    hunk = "\n".join("+" + l for l in lines)
    return (
        f"diff --git a/{path} b/{path}\n"
        "new file mode 100644\n"
        f"index 0000000..{rng.randrange(16**7):07x}\n"
        "--- /dev/null\n"
        f"+++ b/{path}\n"
        f"@@ -0,0 +1,{len(lines)} @@\n" + hunk + "\n"
    )


def make_deleted_file_diff(rng: random.Random) -> str:
    path = f"old/{rng.choice(_WORDS)}.cfg"
    lines = _random_lines(rng, rng.randint(1, 4))
    hunk = "\n".join("-" + l for l in lines)
    return (
        f"diff --git a/{path} b/{path}\n"
        "deleted file mode 100644\n"
        f"index {rng.randrange(16**7):07x}..0000000\n"
        f"--- a/{path}\n"
        "+++ /dev/null\n"
        f"@@ -1,{len(lines)} +0,0 @@\n" + hunk + "\n"
    )


def make_rename_diff(rng: random.Random) -> str:
    old_path = f"pkg/{rng.choice(_WORDS)}.py"
    new_path = f"pkg/{rng.choice(_WORDS)}_renamed.py"
    return (
        f"diff --git a/{old_path} b/{new_path}\n"
        "similarity index 100%\n"
        f"rename from {old_path}\n"
        f"rename to {new_path}\n"
    )


def make_mode_change_diff(rng: random.Random) -> str:
    path = f"bin/{rng.choice(_WORDS)}.sh"
    return (
        f"diff --git a/{path} b/{path}\n"
        "old mode 100644\n"
        "new mode 100755\n"
    )


def make_no_newline_diff(rng: random.Random) -> str:
    path = f"cfg/{rng.choice(_WORDS)}.ini"
    return (
        f"--- a/{path}\n"
        f"+++ b/{path}\n"
        "@@ -1,1 +1,1 @@\n"
        "-old value\n"
        "\\ No newline at end of file\n"
        "+new value\n"
        "\\ No newline at end of file\n"
    )


def make_multi_file_diff(rng: random.Random) -> str:
    return make_plain_diff(rng) + make_plain_diff(rng)


def make_hunk_with_section(rng: random.Random) -> str:
    path = f"mod/{rng.choice(_WORDS)}.py"
    return (
        f"--- a/{path}\n"
        f"+++ b/{path}\n"
        "@@ -3,3 +3,4 @@ def compute(self):\n"
        " before\n"
        "-middle\n"
        "+center\n"
        "+extra\n"
        " after\n"
    )


_MAKERS = (
    make_plain_diff,
    make_plain_diff,
    make_plain_diff,
    make_git_diff,
    make_git_diff,
    make_new_file_diff,
    make_deleted_file_diff,
    make_rename_diff,
    make_mode_change_diff,
    make_no_newline_diff,
    make_multi_file_diff,
    make_hunk_with_section,
)


def build_corpus(seed: int = 20240901, count: int = 200) -> list[str]:
    rng = random.Random(seed)
    return [(_MAKERS[i % len(_MAKERS)])(rng) for i in range(count)]


def _truncate_header(diff: str) -> str:
    return diff.replace("--- ", "-- ", 1)


def _drop_plus_label(diff: str) -> str:
    lines = diff.split("\n")
    return "\n".join(l for l in lines if not l.startswith("+++ "))


def _corrupt_count(diff: str) -> str:
    lines = diff.split("\n")
    for i, line in enumerate(lines):
        if line.startswith("@@ "):
            # Inflate the new-side count so the body comes up short.
            head, _, rest = line.partition(" +")
            nums, _, tail = rest.partition(" @@")
            if "," in nums:
                start, _, length = nums.partition(",")
                nums = f"{start},{int(length) + 7}"
            else:
                nums = f"{nums},8"
            lines[i] = f"{head} +{nums} @@{tail}"
            break
    return "\n".join(lines)


def _mangle_hunk_marker(diff: str) -> str:
    return diff.replace("@@ -", "@! -", 1)


def _chop_tail(diff: str) -> str:
    lines = diff.rstrip("\n").split("\n")
    return "\n".join(lines[:-1]) + "\n"


def _garbage_prefix(diff: str) -> str:
    return "this is not a diff header\n" + diff


def _binary_marker(diff: str) -> str:
    first = diff.split("\n", 1)[0]
    path = first.split("/")[-1] if "/" in first else "blob"
    return f"Binary files a/{path} and b/{path} differ\n"


_MUTATORS = (
    _truncate_header,
    _drop_plus_label,
    _corrupt_count,
    _mangle_hunk_marker,
    _chop_tail,
    _garbage_prefix,
    _binary_marker,
)


def build_adversarial(seed: int = 20240902, count: int = 50) -> list[str]:
    """Malformed mutations of otherwise-valid diffs."""
    rng = random.Random(seed)
    out = []
    for i in range(count):
        base = make_plain_diff(rng) if i % 2 else make_git_diff(rng)
        out.append(_MUTATORS[i % len(_MUTATORS)](base))
    return out
