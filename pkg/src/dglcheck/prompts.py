"""Propose and revise prompts for the formalization loop."""

from __future__ import annotations

import re

MAX_EXAMPLES = 4
MAX_REPAIR_EXAMPLES = 2

GRAMMAR = """\
Syntax (ASCII only):
  terms        x, 2, 0.5, -e, e+f, e-f, e*f, e/f, e^2 (integer exponents only)
  comparisons  e = f, e != f, e < f, e <= f, e > f, e >= f
  formulas     true, false, !P, P & Q, P | Q, P -> Q, P <-> Q,
               \\forall x P, \\exists x P, <game> P, [game] P
  games        x := e;           assignment
               x := *;           arbitrary value (chosen by the player in control)
               ?P;               test: the player in control loses if P is false
               {x' = e, t' = 1}  continuous evolution for a chosen duration
               {x' = e & Q}      evolution that must stay inside Q
               a; b              sequence
               a ++ b            choice
               {a}^@             dual: the opponent takes control of a
               {a}*              repetition (avoid: loops cannot be checked)
"""

MISTAKES = """\
Common mistakes and their remedies:
  - Unicode symbols such as ⟨ ⟩ ∧ ∨ → ≥ ·: write < > & | -> >= * instead.
  - Missing ';' between statements: write x := 0; y := 1;
  - Primed variables outside braces: write {x' = v} instead of x' = v.
  - Assigning a quantity the problem fixes (x := d) lets the player choose it;
    use a test (?x = d;) to force it instead.
  - Forgetting a clock: add t := 0; and t' = 1 to measure durations.
  - Unstated physical assumptions (positive speeds, nonzero distances) belong
    in front of the modality: (v > 0 & d > 0) -> <...> goal.
  - Fractional exponents and square roots are not supported; square both sides.
"""

PROPOSE_SYSTEM = (
    "You formalize kinematics problems as hybrid games in differential game "
    "logic. Reply with exactly one formula of the form\n"
    "  assumptions -> <game> goal\n"
    "in which Angel wins exactly when the free variable named in the problem "
    "has its correct value. Every phase of motion must be modelled with "
    "differential equations, and the transitions between phases must be "
    "enforced with tests. Do not solve the problem yourself.\n\n"
    + GRAMMAR
    + "\n"
    + MISTAKES
)

REVISE_SYSTEM = (
    "You repair formalizations of kinematics problems written in differential "
    "game logic. You are given the problem and earlier attempts together with "
    "the feedback from the parser. Reply with exactly one corrected formula.\n\n"
    + GRAMMAR
    + "\n"
    + MISTAKES
)

REPAIR_EXAMPLES = [
    {
        "question": (
            "An object starts at the origin and moves with constant velocity v "
            "for a duration T, ending at position d. Leave d as a free variable."
        ),
        "proposal": "T ≥ 0 → ⟨x := 0; t := 0; {x' = v, t' = 1}; ?t = T;⟩ x = d",
        "feedback": (
            "The input formula contains an unsupported Unicode character "
            "(possibly ≥). Use only ASCII characters."
        ),
        "repair": "T >= 0 -> <x := 0; t := 0; {x' = v, t' = 1}; ?t = T;> x = d",
    },
    {
        "question": (
            "An object starts from rest and accelerates with constant "
            "acceleration a for a duration T, ending at position d. Leave d as "
            "a free variable."
        ),
        "proposal": "T >= 0 -> <x := 0; v := 0 t := 0; {x' = v, v' = a, t' = 1}; ?t = T;> x = d",
        "feedback": (
            "Missing ';' before 't' at line 1, column 27; terminate every "
            "statement of a game with ';'."
        ),
        "repair": "T >= 0 -> <x := 0; v := 0; t := 0; {x' = v, v' = a, t' = 1}; ?t = T;> x = d",
    },
]


def _question(text: str) -> str:
    return f"Problem:\n{text.strip()}\n\nFormalize this problem."


def build_propose_prompt(question: str, examples=()) -> list:
    """System message, one user/assistant pair per solved example, then the question.

    ``examples`` holds few-shot Benchmarks (with ``reference_model``) or
    ``(question, model)`` pairs; at most four are used.
    """
    messages = [{"role": "system", "content": PROPOSE_SYSTEM}]
    for ex in list(examples)[:MAX_EXAMPLES]:
        q, model = (ex.question, ex.reference_model) if hasattr(ex, "question") else ex
        messages.append({"role": "user", "content": _question(q)})
        messages.append({"role": "assistant", "content": model})
    messages.append({"role": "user", "content": _question(question)})
    return messages


def _history_block(history) -> str:
    parts = []
    for n, item in enumerate(history, 1):
        proposal, feedback = item["proposal"], item["feedback"]
        if not isinstance(feedback, str):
            feedback = "\n".join(str(f) for f in feedback)
        parts.append(f"Attempt {n}:\n{proposal}\nFeedback:\n{feedback}")
    return "\n\n".join(parts)


def build_revise_prompt(question: str, history, repair_examples=None) -> list:
    """Repair prompt listing every failed proposal with its feedback, newest last."""
    assert history, "revise prompt needs at least one failed attempt"
    if repair_examples is None:
        repair_examples = REPAIR_EXAMPLES
    messages = [{"role": "system", "content": REVISE_SYSTEM}]
    for ex in list(repair_examples)[:MAX_REPAIR_EXAMPLES]:
        hist = [{"proposal": ex["proposal"], "feedback": ex["feedback"]}]
        messages.append({
            "role": "user",
            "content": f"Problem:\n{ex['question']}\n\n{_history_block(hist)}\n\nRepair the formula.",
        })
        messages.append({"role": "assistant", "content": ex["repair"]})
    messages.append({
        "role": "user",
        "content": f"Problem:\n{question.strip()}\n\n{_history_block(history)}\n\nRepair the formula.",
    })
    return messages


_FENCE_RE = re.compile(r"```[A-Za-z0-9_-]*\n(.*?)```", re.S)
_OPERATOR = re.compile(r"[<>=\[\]{}?&|!()+\-*/^]|[^\x00-\x7f]")


def extract_formula(completion: str) -> str:
    """Strip code fences and leading prose from a completion."""
    m = _FENCE_RE.search(completion)
    text = m.group(1) if m else completion
    lines = text.strip().splitlines()
    for i, line in enumerate(lines):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        # prose is a line without any operator, or one introducing what follows
        if _OPERATOR.search(s) and not s.endswith(":"):
            return "\n".join(lines[i:]).strip()
    return text.strip()
