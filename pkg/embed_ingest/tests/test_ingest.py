from __future__ import annotations

import json

import pytest

from embed_ingest.cli import main as cli_main
from embed_ingest.corpus import read_corpus, read_roster
from embed_ingest.errors import SchemaError
from embed_ingest.ingest import embed_corpus

from conftest import FIXTURES, run_router_cli

CORPUS = FIXTURES / "corpus_small.jsonl"
ROSTER = FIXTURES / "roster_tiny.json"


class TestCorpusReading:
    def test_roster_round_trip(self):
        roster = read_roster(ROSTER)
        assert [a.name for a in roster] == ["ada", "davinci"]
        assert roster[1].price_per_1k_tokens == "0.0200"

    def test_correctness_derived_from_completions(self):
        rows = read_corpus(CORPUS, read_roster(ROSTER))
        by_id = {r.query_id: r for r in rows}
        # c2: ada answered "positive" on a negative gold label; davinci right
        assert by_id["c2"].correctness == (0, 1)
        # c3: ada abstained ("hard to say"), davinci right
        assert by_id["c3"].correctness == (0, 1)
        # c5: ada's "it is positive, not negative" parses positive (first hit)
        assert by_id["c5"].correctness == (1, 1)

    def test_explicit_bits_win_over_derivation(self, tmp_path):
        row = {
            "query_id": "x1",
            "text": "some text",
            "label": "positive",
            "correctness": {"ada": 0, "davinci": 1},
            "token_counts": {"ada": 10, "davinci": 12},
        }
        corpus = tmp_path / "c.jsonl"
        corpus.write_text(json.dumps(row) + "\n")
        rows = read_corpus(corpus, read_roster(ROSTER))
        assert rows[0].correctness == (0, 1)

    def test_missing_arm_names_query_id(self, tmp_path):
        row = {
            "query_id": "broken-row",
            "text": "t",
            "label": "positive",
            "completions": {"ada": "Positive."},  # davinci missing
            "token_counts": {"ada": 10, "davinci": 10},
        }
        corpus = tmp_path / "c.jsonl"
        corpus.write_text(json.dumps(row) + "\n")
        with pytest.raises(SchemaError, match="broken-row"):
            read_corpus(corpus, read_roster(ROSTER))

    def test_duplicate_query_id_rejected(self, tmp_path):
        row = {
            "query_id": "dup",
            "text": "t",
            "label": "negative",
            "correctness": {"ada": 1, "davinci": 0},
            "token_counts": {"ada": 5, "davinci": 5},
        }
        corpus = tmp_path / "c.jsonl"
        corpus.write_text(json.dumps(row) + "\n" + json.dumps(row) + "\n")
        with pytest.raises(SchemaError, match="dup"):
            read_corpus(corpus, read_roster(ROSTER))


class TestEmbedCorpus:
    def test_output_passes_router_validation_with_zero_warnings(self, tmp_path):
        out = tmp_path / "corpus.ds"
        count = embed_corpus(CORPUS, ROSTER, "hash:64", out)
        assert count == 6
        assert (tmp_path / "corpus.ds.emb").exists()
        result = run_router_cli("validate-data", "--data", str(out))
        assert result.returncode == 0, result.stderr
        assert "0 warnings" in result.stdout
        assert "6 records" in result.stdout

    def test_rerun_is_byte_identical(self, tmp_path):
        first, second = tmp_path / "one", tmp_path / "two"
        first.mkdir(), second.mkdir()
        embed_corpus(CORPUS, ROSTER, "hash:64", first / "c.ds")
        embed_corpus(CORPUS, ROSTER, "hash:64", second / "c.ds")
        assert (first / "c.ds").read_bytes() == (second / "c.ds").read_bytes()
        assert (first / "c.ds.emb").read_bytes() == (second / "c.ds.emb").read_bytes()

    def test_header_records_encoder_identity(self, tmp_path):
        out = tmp_path / "corpus.ds"
        embed_corpus(CORPUS, ROSTER, "hash:64", out)
        header = json.loads(out.read_text().splitlines()[0])
        assert header["encoder"] == "hash-v1:dim=64"
        assert header["embedding_dim"] == 64

    def test_refuses_to_mix_encoders(self, tmp_path):
        out = tmp_path / "corpus.ds"
        embed_corpus(CORPUS, ROSTER, "hash:64", out)
        with pytest.raises(SchemaError, match="hash-v1:dim=64"):
            embed_corpus(CORPUS, ROSTER, "hash:32", out)
        embed_corpus(CORPUS, ROSTER, "hash:64", out)  # same encoder is fine

    def test_inline_mode_also_validates(self, tmp_path):
        out = tmp_path / "inline.ds"
        embed_corpus(CORPUS, ROSTER, "hash:16", out, sidecar=False)
        assert not (tmp_path / "inline.ds.emb").exists()
        result = run_router_cli("validate-data", "--data", str(out))
        assert result.returncode == 0, result.stderr

    def test_l2_flag_changes_id_and_vectors(self, tmp_path):
        plain, unit = tmp_path / "plain.ds", tmp_path / "unit.ds"
        embed_corpus(CORPUS, ROSTER, "hash:32", plain)
        embed_corpus(CORPUS, ROSTER, "hash:32", unit, l2_normalize=True)
        assert (
            json.loads(unit.read_text().splitlines()[0])["encoder"] == "hash-v1:dim=32:l2"
        )
        assert (plain.with_name("plain.ds.emb").read_bytes()
                != unit.with_name("unit.ds.emb").read_bytes())


class TestCli:
    def test_end_to_end(self, tmp_path, capsys):
        out = tmp_path / "out.ds"
        code = cli_main(
            ["--corpus", str(CORPUS), "--roster", str(ROSTER), "--encoder", "hash:64",
             "--out", str(out)]
        )
        assert code == 0
        assert "embedded 6 rows" in capsys.readouterr().out
        assert run_router_cli("validate-data", "--data", str(out)).returncode == 0

    def test_schema_error_exits_2(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"query_id": "only-id"}\n')
        code = cli_main(
            ["--corpus", str(bad), "--roster", str(ROSTER), "--out", str(tmp_path / "o.ds")]
        )
        assert code == 2

    def test_unknown_encoder_exits_1(self, tmp_path):
        code = cli_main(
            ["--corpus", str(CORPUS), "--roster", str(ROSTER),
             "--encoder", "warp:9", "--out", str(tmp_path / "o.ds")]
        )
        assert code == 1

    def test_usage_error_exits_1(self):
        assert cli_main(["--corpus", "only"]) == 1
