import pytest
from hypothesis import given
from hypothesis import strategies as st

from procbench.templating import TemplateError, placeholders, render_template


def test_basic_substitution():
    assert render_template("ior -t ${ts} -N ${nodes}", {"ts": 4096, "nodes": 8}) == "ior -t 4096 -N 8"


def test_single_pass():
    # substituted values are never rescanned
    assert render_template("${a}${b}", {"a": "x", "b": "${"}) == "x${"
    assert render_template("${a}", {"a": "${b}", "b": 1}) == "${b}"


def test_booleans_render_lowercase():
    assert render_template("${f}/${t}", {"f": False, "t": True}) == "false/true"


@pytest.mark.parametrize("text", ["${", "a ${b", "${1x}", "${}", "${a b}"])
def test_malformed(text):
    with pytest.raises(TemplateError):
        render_template(text, {"a": 1, "b": 2})


def test_unknown_placeholder():
    with pytest.raises(TemplateError, match="missing"):
        render_template("${missing}", {})


def test_placeholders_first_appearance_order():
    assert placeholders("${b} ${a} ${b} $a {c}") == ["b", "a"]


@given(st.text(alphabet=st.characters(blacklist_characters="$"), max_size=50))
def test_text_without_placeholders_is_identity(text):
    assert render_template(text, {}) == text
