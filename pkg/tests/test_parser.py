import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from dglcheck import ir
from dglcheck.parser import (
    Code, DglSyntaxError, check_syntax, parse_formula, parse_game, parse_term, print_formula,
    print_game, print_term, render, strip_comments, tokenize, unicode_diagnostics,
)
from helpers import formulas, games, terms

UNICODE_FEEDBACK = (
    "The input formula contains an unsupported Unicode character (possibly {}). "
    "Use only ASCII characters."
)

# --------------------------------------------------------------------------
# Printing
# --------------------------------------------------------------------------


@pytest.mark.parametrize("src, printed", [
    ("x+y*z", "x + y*z"),
    ("(x+y)*z", "(x + y)*z"),
    ("x-(y-z)", "x - (y - z)"),
    ("x-y-z", "x - y - z"),
    ("-x^2", "-x^2"),
    ("(-x)^2", "(-x)^2"),
    ("a/(b*c)", "a/(b*c)"),
    ("2.50*t", "2.50*t"),
])
def test_print_term(src, printed):
    assert print_term(parse_term(src)) == printed


@pytest.mark.parametrize("src, printed", [
    ("x=1 -> y=1 -> z=1", "x = 1 -> y = 1 -> z = 1"),
    ("(x=1 -> y=1) -> z=1", "(x = 1 -> y = 1) -> z = 1"),
    ("x=1 | y=1 & z=1", "x = 1 | y = 1 & z = 1"),
    ("(x=1 | y=1) & z=1", "(x = 1 | y = 1) & z = 1"),
    ("!(x=1 & y=1)", "!(x = 1 & y = 1)"),
    ("\\forall t (t>=0)", "\\forall t (t >= 0)"),
    ("<x:=1;?x>0;> true", "<x := 1; ?x > 0;> true"),
    ("[{x'=v,t'=1&t<=T}] x>=0", "[{x' = v, t' = 1 & t <= T}] x >= 0"),
    ("<{a:=1;}^@ ++ b:=*;> a=b", "<{a := 1;}^@ ++ b := *;> a = b"),
    ("<{{x'=1}}*> x>0", "<{{x' = 1}}*> x > 0"),
])
def test_print_formula(src, printed):
    assert print_formula(parse_formula(src)) == printed


def test_ode_followed_by_statement_gets_separator():
    g = parse_game("{x'=1} x := 0;")
    assert print_game(g) == "{x' = 1}; x := 0;"


# --------------------------------------------------------------------------
# Round trips
# --------------------------------------------------------------------------

_RT = settings(max_examples=1000, deadline=None,
               suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])


@_RT
@given(formulas)
def test_formula_round_trip(f):
    text = print_formula(f)
    assert parse_formula(text) == f
    # printing is a fixed point after one round
    assert print_formula(parse_formula(text)) == text


@settings(max_examples=300, deadline=None)
@given(terms)
def test_term_round_trip(t):
    assert parse_term(print_term(t)) == t


@settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(games)
def test_game_round_trip(g):
    assert parse_game(print_game(g)) == g


def test_model2_round_trips(model2_path):
    f = parse_formula(model2_path.read_text())
    assert parse_formula(print_formula(f)) == f


# --------------------------------------------------------------------------
# Accepted surface syntax
# --------------------------------------------------------------------------


def test_comments_and_whitespace_are_ignored():
    src = "# header\n<x := 0; # reset\n y := 1;>\n  x < y  # done\n"
    assert parse_formula(src) == parse_formula("<x:=0;y:=1;> x<y")
    assert "#" not in strip_comments(src)


def test_trailing_semicolon_is_optional_before_closers():
    assert parse_formula("<x := 0> x = 0") == parse_formula("<x := 0;> x = 0")
    assert parse_game("{a := 1 ++ b := 2}") == parse_game("{a := 1; ++ b := 2;}")


def test_sequence_and_choice_associate_right():
    g = parse_game("a := 1; b := 2; c := 3;")
    assert isinstance(g, ir.Seq) and isinstance(g.second, ir.Seq)
    g = parse_game("a := 1; ++ b := 2; ++ c := 3;")
    assert isinstance(g, ir.Choice) and isinstance(g.right, ir.Choice)


def test_sequence_binds_tighter_than_choice():
    g = parse_game("a := 1; b := 2; ++ c := 3;")
    assert isinstance(g, ir.Choice) and isinstance(g.left, ir.Seq)


def test_decimal_literals_are_exact():
    t = parse_term("0.1 + 0.2")
    assert t.left.value + t.right.value == parse_term("0.3").value


def test_byte_input_is_decoded():
    assert parse_formula("x ≥ 0".replace("≥", ">=").encode()) == parse_formula("x >= 0")


# --------------------------------------------------------------------------
# Diagnostics
# --------------------------------------------------------------------------


@pytest.mark.parametrize("src, code, column", [
    ("x ≥ 0", Code.UNICODE_CHAR, 3),
    ("<x:=0 x=0", Code.UNBALANCED_DELIMITER, 1),
    ("<x:=1;> x = 1)", Code.UNBALANCED_DELIMITER, 14),
    ("<x := 0 ;; y:=1;> x=1", Code.UNKNOWN_TOKEN, 10),
    ("x > 0 & ", Code.UNKNOWN_TOKEN, 9),
    ("<x := 0; y := 1 z := 2;> x=1", Code.MISSING_SEMICOLON, 17),
    ("x := 1;", Code.BAD_MODALITY, 1),
    ("<{x'=v & }> x = 0", Code.BAD_ODE, 10),
    ("x' = v", Code.BAD_ODE, 2),
    ("<x:=1;> x=1 y", Code.TRAILING_INPUT, 13),
    ("<x := x^0.5;> x=1", Code.OTHER, 9),
])
def test_diagnostic_codes_and_positions(src, code, column):
    diags = check_syntax(src)
    assert diags, src
    d = diags[0]
    assert d.code is code
    assert (d.line, d.column) == (1, column)
    assert len(d.message) <= 200


def test_unicode_message_is_verbatim():
    for ch in "≥→⟨∧·":
        diags = check_syntax(f"x = 1 {ch} y = 2")
        assert diags[0].code is Code.UNICODE_CHAR
        assert diags[0].message == UNICODE_FEEDBACK.format(ch)


def test_every_unicode_character_is_reported_with_byte_offsets():
    diags = unicode_diagnostics("a ≥ b → c")
    assert [dict(d.params)["bad_char"] for d in diags] == ["≥", "→"]
    assert diags[0].offset == 2
    assert diags[1].offset == len("a ≥ b ".encode())


def test_multiline_positions():
    src = "x > 0 ->\n<x := 0;\n y := 1 z := 2;> x = 1"
    (d,) = check_syntax(src)
    assert d.code is Code.MISSING_SEMICOLON and (d.line, d.column) == (3, 9)
    assert "z" in d.excerpt


def test_parse_error_carries_diagnostics():
    with pytest.raises(DglSyntaxError) as exc:
        parse_formula("<x := 0 y := 1;> x = 1")
    assert exc.value.diagnostics[0].code is Code.MISSING_SEMICOLON


def test_render_clips_long_parameters():
    msg = render(Code.UNKNOWN_TOKEN, token="x" * 500, line=1, col=1, expected="y" * 500)
    assert len(msg) <= 200


def test_diagnostic_dict_is_json_ready():
    import json

    (d,) = check_syntax("x ≥ 0")
    assert json.loads(json.dumps(d.to_dict()))["code"] == "UnicodeChar"


def test_valid_input_has_no_diagnostics(model1_path, model2_path):
    assert check_syntax(model1_path.read_text()) == []
    assert check_syntax(model2_path.read_text()) == []


def test_deep_nesting_reports_instead_of_crashing():
    src = "(" * 5000 + "x = 1" + ")" * 5000
    diags = check_syntax(src)
    assert isinstance(diags, list)


# --------------------------------------------------------------------------
# Fuzzing: arbitrary input yields a value or diagnostics, never another error
# --------------------------------------------------------------------------

ALPHABET = list("xyt01.5 +-*/^()<>[]{}:=;?!&|'@*#\n\\") + ["forall", "exists", "->", "<->", "++", "≥"]


def _assert_total(src):
    try:
        parse_formula(src)
    except DglSyntaxError as e:
        assert e.diagnostics
        for d in e.diagnostics:
            assert d.message and len(d.message) <= 200


@settings(max_examples=1500, deadline=None)
@given(st.lists(st.sampled_from(ALPHABET), max_size=40).map("".join))
def test_fuzz_token_soup(src):
    _assert_total(src)


@settings(max_examples=500, deadline=None)
@given(st.text(max_size=60))
def test_fuzz_arbitrary_text(src):
    _assert_total(src)


@settings(max_examples=500, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(formulas, st.data())
def test_fuzz_mutated_valid_formulas(f, data):
    text = print_formula(f)
    i = data.draw(st.integers(0, len(text)))
    j = data.draw(st.integers(i, min(len(text), i + 3)))
    ins = data.draw(st.sampled_from(["", ";", "}", "(", "≥", "x", " := "]))
    _assert_total(text[:i] + ins + text[j:])


def test_tokenize_reports_kinds():
    kinds = [t.kind for t in tokenize("x := 2.5;")]
    assert len(kinds) >= 4
