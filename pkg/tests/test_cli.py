import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer
from pathlib import Path

import pytest

from molrl.cli import main
from molrl.evaluate import CAPTION_COLUMNS, GENERATION_COLUMNS

ROOT = Path(__file__).resolve().parents[1]
CORPUS_FILE = ROOT / "data" / "sample_corpus.jsonl"
RECORDS = [json.loads(x) for x in CORPUS_FILE.read_text().splitlines() if x]


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return path


def read_csv_means(path):
    header, *_, mean = Path(path).read_text().splitlines()
    return dict(zip(header.split(",")[1:], map(float, mean.split(",")[1:])))


def test_eval_generation_gold_echo(tmp_path):
    pred = write_jsonl(tmp_path / "p.jsonl", [{"id": r["id"], "response": f"<answer>{r['selfies']}</answer>"} for r in RECORDS])
    ref = write_jsonl(tmp_path / "r.jsonl", [{"id": r["id"], "selfies": r["selfies"]} for r in RECORDS])
    assert main(["eval", "--pred", str(pred), "--ref", str(ref), "--task", "generation", "--out", str(tmp_path / "rep")]) == 0
    means = read_csv_means(tmp_path / "rep.csv")
    assert set(means) == set(GENERATION_COLUMNS)
    for col in ("exact", "validity", "path_fts", "keys_fts", "circular_fts", "frag_j", "frag_r", "fg_match", "bleu"):
        assert means[col] == pytest.approx(1.0), col
    assert means["levenshtein"] == 0.0
    md = (tmp_path / "rep.md").read_text()
    assert "config hash" in md and "Consistency check" in md


def test_eval_all_untagged(tmp_path):
    pred = write_jsonl(tmp_path / "p.jsonl", [{"id": r["id"], "response": r["selfies"]} for r in RECORDS])
    ref = write_jsonl(tmp_path / "r.jsonl", [{"id": r["id"], "reference": r["selfies"]} for r in RECORDS])
    assert main(["eval", "--pred", str(pred), "--ref", str(ref), "--task", "generation", "--out", str(tmp_path / "rep")]) == 0
    means = read_csv_means(tmp_path / "rep.csv")
    assert means["validity"] == 0.0 and means["exact"] == 0.0


def test_eval_caption_columns(tmp_path):
    pred = write_jsonl(tmp_path / "p.jsonl", [{"id": r["id"], "prediction": f"<answer>{r['description']}</answer>"} for r in RECORDS])
    ref = write_jsonl(tmp_path / "r.jsonl", [{"id": r["id"], "description": r["description"]} for r in RECORDS])
    assert main(["eval", "--pred", str(pred), "--ref", str(ref), "--task", "caption", "--out", str(tmp_path / "c"), "--workers", "3"]) == 0
    means = read_csv_means(tmp_path / "c.csv")
    assert set(means) == set(CAPTION_COLUMNS)
    assert all(v >= 0.99 for v in means.values())


def test_eval_id_mismatch_exit_code(tmp_path, capsys):
    pred = write_jsonl(tmp_path / "p.jsonl", [{"id": "a", "response": "x"}])
    ref = write_jsonl(tmp_path / "r.jsonl", [{"id": "b", "reference": "[C]"}])
    assert main(["eval", "--pred", str(pred), "--ref", str(ref), "--task", "generation", "--out", str(tmp_path / "x")]) == 2
    assert "ids differ" in capsys.readouterr().err


def test_eval_missing_file(tmp_path):
    assert main(["eval", "--pred", str(tmp_path / "nope"), "--ref", str(tmp_path / "nope"), "--task", "caption",
                 "--out", str(tmp_path / "x")]) == 2


def test_reward_gold_and_malformed(tmp_path):
    rows = []
    for r in RECORDS:
        rows.append({"response": f"<answer>{r['selfies']}</answer>", "reference": r["selfies"], "task": "generation"})
        rows.append({"response": f"<answer>{r['description']}</answer>", "reference": r["description"], "task": "caption"})
        rows.append({"response": r["selfies"], "reference": r["selfies"], "task": "generation"})
    inp = write_jsonl(tmp_path / "in.jsonl", rows)
    assert main(["reward", "--in", str(inp), "--out", str(tmp_path / "out.jsonl"), "--workers", "2"]) == 0
    out = [json.loads(x) for x in (tmp_path / "out.jsonl").read_text().splitlines()]
    assert len(out) == len(rows)
    for k, row in enumerate(out):
        if k % 3 == 0:
            assert row["total"] == 2.0
        elif k % 3 == 1:
            assert row["total"] >= 1.98
        else:
            assert row["total"] == 0.0


def test_reward_empty_file(tmp_path):
    inp = tmp_path / "empty.jsonl"
    inp.write_text("")
    assert main(["reward", "--in", str(inp), "--out", str(tmp_path / "o.jsonl")]) == 0
    assert (tmp_path / "o.jsonl").read_text() == ""


def test_reward_schema_errors(tmp_path):
    bad = write_jsonl(tmp_path / "bad.jsonl", [{"response": "x"}])
    assert main(["reward", "--in", str(bad), "--out", str(tmp_path / "o.jsonl")]) == 2
    (tmp_path / "garbled.jsonl").write_text("{oops\n")
    assert main(["reward", "--in", str(tmp_path / "garbled.jsonl"), "--out", str(tmp_path / "o.jsonl")]) == 2
    ok = write_jsonl(tmp_path / "ok.jsonl", [{"response": "x", "reference": "y", "task": "caption"}])
    assert main(["reward", "--in", str(ok), "--out", str(tmp_path / "o.jsonl"), "--mask", "bogus"]) == 2


def test_reward_task_default_and_mask(tmp_path):
    inp = write_jsonl(tmp_path / "in.jsonl", [{"response": "<answer>[C][O]</answer>", "reference": "[C][O]"}])
    assert main(["reward", "--in", str(inp), "--out", str(tmp_path / "o.jsonl"), "--task", "generation", "--mask", ""]) == 0
    row = json.loads((tmp_path / "o.jsonl").read_text())
    assert row["total"] == 0.5 and row["mask"] == "format-only"


def test_grpo_demo_byte_identical(tmp_path):
    args = ["grpo-demo", "--epochs", "3"]
    assert main(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_text().startswith("epoch,mean_reward,format_rate")


def test_grpo_demo_config_errors(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"grpo": {"group_size": 1}}))
    assert main(["grpo-demo", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 2
    cfg.write_text(json.dumps({"nonsense": 1}))
    assert main(["grpo-demo", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 2
    assert main(["grpo-demo", "--beta", "-1", "--out", str(tmp_path / "x.csv")]) == 2


def test_datagen_mock(tmp_path, capsys):
    out = tmp_path / "sft.jsonl"
    assert main(["datagen", "--corpus", str(CORPUS_FILE), "--task", "generation", "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["acceptance_rate"] == 1.0 and summary["processed"] == len(RECORDS)
    assert len(out.read_text().splitlines()) == len(RECORDS)
    # rerun resumes and adds nothing
    assert main(["datagen", "--corpus", str(CORPUS_FILE), "--task", "generation", "--out", str(out)]) == 0
    assert json.loads(capsys.readouterr().out.strip())["resumed"] == len(RECORDS)
    assert len(out.read_text().splitlines()) == len(RECORDS)


def test_datagen_empty_corpus(tmp_path, capsys):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert main(["datagen", "--corpus", str(empty), "--task", "caption", "--out", str(tmp_path / "o.jsonl")]) == 0
    assert json.loads(capsys.readouterr().out)["total"] == 0


class _EchoHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        prompt = body["prompt"]
        gold = prompt[prompt.rfind("<answer>") + 8:prompt.rfind("</answer>")].strip()
        data = json.dumps({"text": f"<answer>{gold}</answer>"}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


def test_datagen_http_provider(tmp_path, monkeypatch, capsys):
    server = HTTPServer(("127.0.0.1", 0), _EchoHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        monkeypatch.setenv("MOLRL_PROVIDER_URL", f"http://127.0.0.1:{server.server_port}/v1/complete")
        out = tmp_path / "o.jsonl"
        assert main(["datagen", "--corpus", str(CORPUS_FILE), "--task", "caption", "--out", str(out), "--provider", "http"]) == 0
        assert json.loads(capsys.readouterr().out)["accepted"] == len(RECORDS)
    finally:
        server.shutdown()


def test_datagen_provider_unreachable(tmp_path, monkeypatch):
    monkeypatch.setenv("MOLRL_PROVIDER_URL", "http://127.0.0.1:9/unreachable")
    code = main(["datagen", "--corpus", str(CORPUS_FILE), "--task", "caption", "--out", str(tmp_path / "o.jsonl"),
                 "--provider", "http", "--concurrency", "1"])
    assert code == 3
