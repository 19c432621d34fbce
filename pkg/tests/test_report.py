from __future__ import annotations

from situlabel.report import (
    accuracy_csv,
    curves_csv,
    fmt_stat,
    mcnemar_csv,
    render_accuracy_table,
    render_f1_table,
    render_mcnemar_grid,
    render_qf_table,
)


def test_fmt_stat_trims_trailing_zeros():
    assert fmt_stat(1.4) == "1.4"
    assert fmt_stat(7.167) == "7.167"
    assert fmt_stat(3.76) == "3.76"
    assert fmt_stat(0.5) == "0.5"
    assert fmt_stat(1.0) == "1"
    assert fmt_stat(None) == "NA"
    assert fmt_stat(float("inf")) == "inf"


def test_qf_row_renders_reference_fixture_byte_exact():
    # rendering fixture: a row given (Q=13.241, p=0.001) must show exactly
    # those strings in the Q and p columns
    table = render_qf_table({"app": (13.241, 0.001, 6.852, 0.001)})
    row = [line for line in table.splitlines() if line.startswith("app")][0]
    cells = row.split()
    assert cells == ["app", "13.241", "0.001", "6.852", "0.001"]


def test_mcnemar_grid_fixture_symmetric_with_na_diagonal():
    models = ["gru", "lstm", "stacked"]
    grid = render_mcnemar_grid(
        models,
        {("gru", "lstm"): 0.228, ("gru", "stacked"): 0.125, ("lstm", "stacked"): 0.546},
        title="McNemar p values: two_opposite_buttons",
    )
    lines = grid.splitlines()
    rows = {line.split()[0]: line.split()[1:] for line in lines[2:]}
    assert rows["gru"] == ["NA", "0.228", "0.125"]
    assert rows["lstm"] == ["0.228", "NA", "0.546"]
    assert rows["stacked"] == ["0.125", "0.546", "NA"]


def test_accuracy_table_structure():
    table = render_accuracy_table(
        {"slider": {"gru": (0.8534, 0.021), "lstm": (0.8101, 0.034)}}
    )
    assert "slider" in table
    assert "0.853 (0.021)" in table
    header = table.splitlines()[1].split()
    assert header == ["technique", "gru", "lstm"]


def test_f1_table_has_three_label_columns():
    table = render_f1_table({"touch": {"Downstairs": 0.69, "Walking": 0.94, "Upstairs": 0.83}})
    header = table.splitlines()[1].split()
    assert header == ["technique", "Downstairs", "Walking", "Upstairs"]
    row = table.splitlines()[3].split()
    assert row == ["touch", "0.69", "0.94", "0.83"]


def test_curves_csv_schema():
    text = curves_csv({"app": {"gru": [([1.0, 0.8], [0.5, 0.7])]}})
    lines = text.splitlines()
    assert lines[0] == "mechanism,model,fold,epoch,train_loss,train_accuracy"
    assert lines[1].startswith("app,gru,0,0,")
    assert len(lines) == 3


def test_accuracy_csv_schema():
    text = accuracy_csv({"app": {"gru": [0.9, 0.8]}})
    lines = text.splitlines()
    assert lines[0] == "mechanism,model,fold,accuracy"
    assert len(lines) == 3


def test_mcnemar_csv_schema():
    text = mcnemar_csv({"app": {("gru", "lstm"): 0.5}})
    assert text.splitlines()[0] == "mechanism,model_a,model_b,p"
    assert text.splitlines()[1] == "app,gru,lstm,0.5"
