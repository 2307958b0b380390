import json

import pytest

import vlmd

TINY = {
    "task": {"n_keys": 4, "value_min": 3, "value_max": 5},
    "corpus": {"train_count": 20, "eval_count": 3},
    "model": {"d_model": 16, "n_heads": 2, "n_layers": 1, "d_ff": 32, "max_len": 96},
    "augment": {"delete_max": 8},
    "optimizer": {"steps": 3, "batch_size": 2},
    "eval": {"lengths": [2, 6]},
}


def test_default_config_round_trips():
    text = vlmd.default_config()
    assert vlmd.normalize_config(text) == text
    assert json.loads(text)["generation"]["temperature"] == 0.2


def test_bad_field_is_named():
    with pytest.raises(vlmd.ConfigError, match=r"augment\.scheduler\.p_merge"):
        vlmd.normalize_config(json.dumps({"augment": {"scheduler": {"p_merge": 1.5}}}))


def test_augment_masks_sentinels_and_balances_weights():
    cfg = json.dumps({"augment": {"scheduler": {"kind": "static", "p_merge": 1.0}}})
    for seed in range(20):
        d = vlmd.augment("A =", "a b c d", "; B = e f g ;", cfg, t=0.9, seed=seed)
        begin, end = d["region"]
        z0, zt, w = d["z0"], d["zt"], d["weights"]
        assert z0[:begin] == zt[:begin] == ["A", "="]
        n_mask = sum(1 for s in zt if s == "[mask]")
        n_delete = sum(1 for s in z0 if s == "[delete]")
        assert (d["n_mask"], d["n_delete"]) == (n_mask, n_delete)
        factor = n_mask / (n_mask - n_delete + 1)
        for i, sym in enumerate(z0):
            if sym in ("[expand]", "[delete]"):
                assert zt[i] == "[mask]"
            if zt[i] != "[mask]":
                assert w[i] == 0.0
            elif sym == "[delete]":
                assert w[i] == pytest.approx(factor / n_delete)
            else:
                assert w[i] == pytest.approx(factor)


def test_train_eval_trace(tmp_path):
    cfg = json.dumps(TINY)
    vlmd.gen_corpus(cfg, tmp_path / "corpus")
    assert (tmp_path / "corpus" / "eval.tsv").exists()

    steps = []
    losses = vlmd.train(cfg, tmp_path / "run", on_step=lambda s, loss: steps.append(s))
    assert len(losses) == 3 and steps == [0, 1, 2]
    assert losses == vlmd.train(cfg, tmp_path / "run2")

    rows = vlmd.evaluate(tmp_path / "run", threads=2)
    assert [r["label"] for r in rows] == ["2", "6", "Avg.", "Oracle"]
    assert all(r["aborted"] == 0 for r in rows)
    no_expand = vlmd.evaluate(tmp_path / "run", expand=False)
    assert all(r["mean_expansions"] == 0 for r in no_expand)

    board, records = vlmd.trace(tmp_path / "run", index=0, init_len=3)
    assert board.startswith("prefix: ")
    assert [json.loads(line)["step"] for line in records.splitlines()][0] == 1
    assert vlmd.trace(tmp_path / "run", init_len=0) == ("", "")
