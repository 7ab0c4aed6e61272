"""Thin command-line client for the diversification service.

Every subcommand maps 1:1 onto a service endpoint. Without --server the
service runs in-process; with --server the same requests go over HTTP (the
server must see the same filesystem, since requests carry file paths).

Exit codes: 0 ok, 1 usage error, 2 data error, 3 internal/connection error.
"""

from __future__ import annotations

import json
import sys

import click
import httpx

from .client import ServiceClient


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _parse_overrides(pairs) -> dict:
    overrides = {}
    for pair in pairs:
        if "=" not in pair:
            raise click.UsageError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = _parse_value(value.strip())
    return overrides


def _call(server: str | None, path: str, payload: dict) -> None:
    try:
        with ServiceClient(server) as client:
            resp = client.post(path, payload)
    except httpx.HTTPError as exc:
        click.echo(f"connection error: {exc}", err=True)
        sys.exit(3)
    if resp.status_code == 200:
        click.echo(json.dumps(resp.json(), indent=2, sort_keys=True))
        return
    try:
        body = resp.json()
    except json.JSONDecodeError:
        body = {"detail": resp.text}
    detail = body.get("detail")
    if not isinstance(detail, str):
        detail = json.dumps(detail)
    click.echo(f"error: {detail}", err=True)
    kind = body.get("kind")
    if kind == "data":
        sys.exit(2)
    if kind == "internal" or resp.status_code >= 500:
        sys.exit(3)
    sys.exit(1)


server_option = click.option("--server", default=None, metavar="URL",
                             help="Remote service URL (default: in-process).")


@click.group()
def cli():
    """Search result diversification toolkit."""


@cli.command("build-tree")
@click.argument("queries", type=click.Path())
@click.argument("out", type=click.Path())
@server_option
def build_tree(queries, out, server):
    """Build a prefix tree from a query log (TSV or one query per line)."""
    _call(server, "/tree/build", {"queries_path": queries, "out_path": out})


@cli.command("emit-dclm")
@click.argument("tree", type=click.Path())
@click.argument("out", type=click.Path())
@click.option("--walks", type=int, required=True, help="Number of random walks.")
@click.option("--seed", type=int, default=0, show_default=True)
@server_option
def emit_dclm(tree, out, walks, seed, server):
    """Emit distributional training samples from random tree walks."""
    _call(server, "/samples/dclm",
          {"tree_path": tree, "walks": walks, "seed": seed, "out_path": out})


@cli.command("emit-clm")
@click.argument("queries", type=click.Path())
@click.argument("out", type=click.Path())
@server_option
def emit_clm(queries, out, server):
    """Emit per-position next-token training samples."""
    _call(server, "/samples/clm", {"queries_path": queries, "out_path": out})


@cli.command("gen-intents")
@click.argument("tree", type=click.Path())
@click.option("--query", default=None, help="Single query.")
@click.option("--topics", default=None, type=click.Path(), help="Topics TSV.")
@click.option("--n", type=int, default=5, show_default=True)
@click.option("--beam", type=int, default=30, show_default=True)
@click.option("--out", default=None, type=click.Path(), help="Intents JSONL output.")
@server_option
def gen_intents(tree, query, topics, n, beam, out, server):
    """Generate candidate intents with the count language model."""
    _call(server, "/intents/generate",
          {"tree_path": tree, "query": query, "topics_path": topics,
           "n": n, "beam": beam, "out_path": out})


@cli.command("retrieve")
@click.argument("corpus", type=click.Path())
@click.argument("topics", type=click.Path())
@click.argument("out", type=click.Path())
@click.option("--scorer", type=click.Choice(["dph", "bm25"]), default="dph",
              show_default=True)
@click.option("--depth", type=int, default=100, show_default=True)
@click.option("--max-passage", is_flag=True, help="Score sliding windows, keep the max.")
@click.option("--window", type=int, default=150, show_default=True)
@click.option("--stride", type=int, default=75, show_default=True)
@click.option("--tag", default="divsearch", show_default=True)
@server_option
def retrieve_cmd(corpus, topics, out, scorer, depth, max_passage, window, stride,
                 tag, server):
    """Retrieve per-topic candidate pools into a TREC run file."""
    _call(server, "/retrieve",
          {"corpus_path": corpus, "topics_path": topics, "scorer": scorer,
           "depth": depth, "max_passage": max_passage, "window": window,
           "stride": stride, "out_path": out, "tag": tag})


@cli.command("score")
@click.argument("corpus", type=click.Path())
@click.argument("topics", type=click.Path())
@click.argument("pools", type=click.Path())
@click.argument("intents", type=click.Path())
@click.argument("out", type=click.Path())
@click.option("--scorer", type=click.Choice(["dph", "bm25"]), default="dph",
              show_default=True)
@click.option("--n", type=int, default=20, show_default=True,
              help="Max intents per topic.")
@click.option("--continuation-only", is_flag=True,
              help="Score intent continuations without the query prefix.")
@click.option("--max-passage", is_flag=True)
@click.option("--window", type=int, default=150, show_default=True)
@click.option("--stride", type=int, default=75, show_default=True)
@server_option
def score_cmd(corpus, topics, pools, intents, out, scorer, n, continuation_only,
              max_passage, window, stride, server):
    """Score pool documents against the query and each intent."""
    _call(server, "/score",
          {"corpus_path": corpus, "topics_path": topics, "pools_path": pools,
           "intents_path": intents, "scorer": scorer, "n": n,
           "use_full_text": not continuation_only, "max_passage": max_passage,
           "window": window, "stride": stride, "out_path": out})


@cli.command("diversify")
@click.argument("scores", type=click.Path())
@click.argument("out", type=click.Path())
@click.option("--aggregator", type=click.Choice(["xquad", "pm2"]), default="xquad",
              show_default=True)
@click.option("--lam", type=float, default=0.5, show_default=True)
@click.option("--n", type=int, default=None, help="Use only the first n intents.")
@click.option("--depth", type=int, default=None,
              help="Re-rank depth (default: whole pool).")
@click.option("--tag", default="divsearch", show_default=True)
@click.option("--trace", default=None, type=click.Path(),
              help="Write per-step objective values as JSON.")
@server_option
def diversify_cmd(scores, out, aggregator, lam, n, depth, tag, trace, server):
    """Aggregate a score matrix into a diversified TREC run."""
    _call(server, "/diversify",
          {"scores_path": scores, "aggregator": aggregator, "lam": lam, "n": n,
           "depth": depth, "out_path": out, "tag": tag, "trace_path": trace})


@cli.command("evaluate")
@click.argument("run", type=click.Path())
@click.argument("qrels", type=click.Path())
@click.option("--alpha", type=float, default=0.5, show_default=True)
@click.option("--beta", type=float, default=0.5, show_default=True)
@click.option("--cutoff", type=int, default=20, show_default=True)
@click.option("--pertopic", default=None, type=click.Path(),
              help="Write per-topic TSV here.")
@click.option("--summary", default=None, type=click.Path(),
              help="Write summary JSON here.")
@server_option
def evaluate_cmd(run, qrels, alpha, beta, cutoff, pertopic, summary, server):
    """Evaluate a run with intent-aware diversity metrics."""
    _call(server, "/evaluate",
          {"run_path": run, "qrels_path": qrels, "alpha": alpha, "beta": beta,
           "cutoff": cutoff, "pertopic_path": pertopic, "summary_path": summary})


@cli.command("run")
@click.argument("config", type=click.Path(), required=False)
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override a config field (JSON-typed values).")
@server_option
def run_cmd(config, overrides, server):
    """Run the full pipeline from a config file."""
    _call(server, "/run",
          {"config_path": config, "overrides": _parse_overrides(overrides)})


@cli.command("tune")
@click.argument("config", type=click.Path(), required=False)
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE")
@click.option("--collection", "collections", multiple=True,
              metavar="NAME:TOPICS:QRELS", required=True,
              help="Named collection (repeat; >= 2 required).")
@click.option("--n-values", default=None, help="Comma-separated intent counts.")
@click.option("--lam-values", default=None, help="Comma-separated lambda values.")
@server_option
def tune_cmd(config, overrides, collections, n_values, lam_values, server):
    """Leave-one-collection-out grid tuning of (n, lambda)."""
    specs = []
    for item in collections:
        parts = item.split(":")
        if len(parts) != 3:
            raise click.UsageError(f"--collection expects NAME:TOPICS:QRELS, got {item!r}")
        specs.append({"name": parts[0], "topics": parts[1], "qrels": parts[2]})
    payload = {
        "config_path": config,
        "overrides": _parse_overrides(overrides),
        "collections": specs,
    }
    if n_values:
        payload["n_values"] = [int(v) for v in n_values.split(",")]
    if lam_values:
        payload["lam_values"] = [float(v) for v in lam_values.split(",")]
    _call(server, "/tune", payload)


@cli.command("stratify")
@click.argument("pertopic", type=click.Path())
@click.argument("topics", type=click.Path())
@click.argument("queries", type=click.Path())
@click.option("--boundaries", default="1,37", show_default=True,
              help="Comma-separated bucket boundaries.")
@click.option("--out", default=None, type=click.Path(), help="Write TSV here.")
@server_option
def stratify_cmd(pertopic, topics, queries, boundaries, out, server):
    """Report metric means stratified by query-log frequency buckets."""
    _call(server, "/stratify",
          {"pertopic_path": pertopic, "topics_path": topics,
           "queries_path": queries,
           "boundaries": [int(b) for b in boundaries.split(",")],
           "out_path": out})


@cli.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
def serve(host, port):
    """Start the diversification service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


def main() -> None:
    try:
        cli.main(standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.Abort:
        sys.exit(1)


if __name__ == "__main__":
    main()
