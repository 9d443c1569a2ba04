"""Command-line interface: gen, run, score, export-rl, replay.

The environment variable ``AMIGO_SEED`` overrides any ``--seed`` flag.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import episodes as ep
from . import harness, metrics, rl, wire
from .catalog import Catalog, load_catalog
from .oracle import NoiseMode
from .rng import derive_seed


def _effective_seed(seed: int) -> int:
    env = os.environ.get("AMIGO_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise click.BadParameter(f"AMIGO_SEED must be an integer, got {env!r}")
    return seed


def _load_catalog(path: str) -> Catalog:
    with open(path, "rb") as handle:
        return load_catalog(handle)


@click.group()
def main() -> None:
    """Hidden-target identification engine over attribute-labeled galleries."""


@main.command()
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True))
@click.option("--tau", "taus", multiple=True, type=float, required=True,
              help="Similarity threshold; repeat for several difficulty settings.")
@click.option("--gallery-size", default=8, show_default=True,
              help="Upper bound; galleries shrink to pool size + 1 when the pool is smaller.")
@click.option("--episodes", "episode_count", default=100, show_default=True,
              help="Episodes to generate per threshold.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def gen(catalog_path: str, taus: tuple[float, ...], gallery_size: int,
        episode_count: int, seed: int, out_dir: str) -> None:
    """Generate episodes (and a gallery-size histogram) from a catalog."""
    seed = _effective_seed(seed)
    catalog = _load_catalog(catalog_path)
    generated: list[ep.Episode] = []
    for tau in taus:
        produced = 0
        targets = sorted(catalog.items)
        for attempt in range(50):
            if produced >= episode_count:
                break
            for index, target_id in enumerate(targets):
                if produced >= episode_count:
                    break
                pool = ep.build_distractor_pool(catalog, target_id, tau, 5)
                if len(pool) < 6:
                    continue
                size = min(gallery_size, len(pool) + 1)
                if size < 2:
                    continue
                config = ep.EpisodeConfig(
                    tau=tau,
                    gallery_size=size,
                    seed=derive_seed(seed, attempt, index, f"{tau:g}"),
                )
                episode = ep.generate_episode(catalog, target_id, config)
                if episode is not None:
                    generated.append(episode)
                    produced += 1
        if produced < episode_count:
            click.echo(
                f"warning: only {produced} feasible episodes at tau={tau:g}", err=True
            )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "episodes.json").write_bytes(ep.dump_episodes(generated))
    stats = ep.stats_rows(ep.gallery_size_stats(generated))
    (out / "gallery_size_stats.json").write_text(json.dumps(stats, indent=2) + "\n")
    click.echo(f"wrote {len(generated)} episodes to {out / 'episodes.json'}")


@main.command()
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True))
@click.option("--episodes", "episodes_path", required=True, type=click.Path(exists=True))
@click.option("--agent", default="greedy", show_default=True,
              help="random | greedy | verifier | scripted | external")
@click.option("--script", "script_path", type=click.Path(exists=True),
              help="Script file for --agent scripted (JSON list of lines).")
@click.option("--connect", "connect_addr", default=None,
              help="host:port the engine listens on for an external agent.")
@click.option("--agent-cmd", "agent_cmd", default=None,
              help="Command to spawn an external agent speaking the line protocol on stdio.")
@click.option("--noise", type=click.Choice([m.value for m in NoiseMode]),
              default="none", show_default=True)
@click.option("--budget", default=20, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--timeout", default=wire.DEFAULT_TURN_TIMEOUT, show_default=True,
              help="Per-turn timeout in seconds for external agents.")
@click.option("--parallel", default=1, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def run(catalog_path: str, episodes_path: str, agent: str, script_path: str | None,
        connect_addr: str | None, agent_cmd: str | None, noise: str, budget: int,
        seed: int, timeout: float, parallel: int, out_dir: str) -> None:
    """Run episodes with an agent and persist transcripts plus a manifest."""
    seed = _effective_seed(seed)
    catalog = _load_catalog(catalog_path)
    episode_list = ep.load_episodes(Path(episodes_path).read_bytes())
    config = harness.RunConfig(
        agent=agent,
        budget=budget,
        noise_mode=NoiseMode(noise),
        noise_seed=seed,
        seed=seed,
        out_dir=out_dir,
        parallelism=parallel,
        turn_timeout=timeout,
    )
    if agent == "external":
        factory = _external_factory(connect_addr, agent_cmd, timeout)
        config = harness.RunConfig(
            agent=agent, budget=budget, noise_mode=NoiseMode(noise), noise_seed=seed,
            seed=seed, out_dir=out_dir, parallelism=1, turn_timeout=timeout,
        )
    elif agent == "scripted":
        if script_path is None:
            raise click.UsageError("--agent scripted requires --script")
        script = json.loads(Path(script_path).read_text())
        factory = harness.agent_factory("scripted", config, script=script)
    else:
        factory = harness.agent_factory(agent, config)
    try:
        result = harness.run_suite(catalog, episode_list, factory, config)
    except metrics.EmptyGroup as exc:
        raise click.ClickException(str(exc)) from exc
    ok = sum(1 for entry in result.manifest if entry.status != "error")
    click.echo(f"ran {ok}/{len(episode_list)} episodes; transcripts in {out_dir}")
    overall = result.report.overall
    click.echo(
        f"verified {overall.verified_accuracy.value:.3f} "
        f"overall {overall.overall_accuracy.value:.3f} "
        f"skip_rate {overall.mean_skip_rate:.3f}"
    )


def _external_factory(connect_addr: str | None, agent_cmd: str | None,
                      timeout: float) -> harness.AgentFactory:
    if connect_addr:
        host, _, port = connect_addr.rpartition(":")
        listener = wire.listen_channel(host or "127.0.0.1", int(port))

        def from_socket(episode: ep.Episode) -> wire.WireAgent:
            return wire.accept_agent(listener, timeout)

        return from_socket
    if agent_cmd:
        import shlex

        command = shlex.split(agent_cmd)

        def from_process(episode: ep.Episode) -> wire.WireAgent:
            return wire.spawn_agent(command, timeout)

        return from_process
    raise click.UsageError("--agent external requires --connect or --agent-cmd")


@main.command()
@click.option("--transcripts", "transcripts_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, type=click.Path())
def score(transcripts_dir: str, out_path: str | None) -> None:
    """Score persisted transcripts and print the aggregate report."""
    transcripts = harness.load_transcripts(transcripts_dir)
    if not transcripts:
        raise click.ClickException(f"no transcripts found under {transcripts_dir}")
    scores = [metrics.score_episode(t) for t in transcripts]
    report = metrics.aggregate(scores)
    doc = metrics.report_to_dict(report)
    if out_path:
        Path(out_path).write_text(json.dumps(doc, indent=2) + "\n")
    click.echo(json.dumps(doc, indent=2))
    click.echo("\ngroup\tmetric\tvalue\tci_low\tci_high")
    for group, metric, value, lo, hi in metrics.flat_rows(report):
        lo_s = "" if lo is None else f"{lo:.4f}"
        hi_s = "" if hi is None else f"{hi:.4f}"
        click.echo(f"{group}\t{metric}\t{value:.4f}\t{lo_s}\t{hi_s}")


@main.command("export-rl")
@click.option("--transcripts", "transcripts_dir", required=True, type=click.Path(exists=True))
@click.option("--alpha", default=1.0, show_default=True)
@click.option("--skip-penalty", default=-0.2, show_default=True)
@click.option("--terminal", default=1.0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def export_rl_cmd(transcripts_dir: str, alpha: float, skip_penalty: float,
                  terminal: float, out_path: str) -> None:
    """Export transcripts as newline-delimited step records with rewards."""
    transcripts = harness.load_transcripts(transcripts_dir)
    config = rl.RewardConfig(alpha=alpha, skip_penalty=skip_penalty, terminal=terminal)
    payload = rl.dump_rl(transcripts, config)
    Path(out_path).write_bytes(payload)
    steps = payload.count(b"\n")
    click.echo(f"wrote {steps} steps to {out_path}")


@main.command()
@click.argument("transcript_path", type=click.Path(exists=True))
def replay(transcript_path: str) -> None:
    """Render a transcript as a human-readable dialogue."""
    doc = json.loads(Path(transcript_path).read_text())
    transcript = harness.transcript_from_dict(doc)
    click.echo(f"episode {transcript.episode_id} ({transcript.agent_name}), "
               f"tau={transcript.tau:g}, gallery of {len(transcript.gallery)}")
    for batch_index, size in enumerate(transcript.upload_batches, start=1):
        click.echo(f"  upload batch {batch_index}: {size} items")
    for p in transcript.premature_outputs:
        click.echo(f"  [premature during batch {p.batch_index}] {p.text!r} ({p.marker})")
    click.echo("  -- End of uploading --")
    for turn in transcript.turns:
        verdict = turn.verdict.upper()
        if turn.violation:
            verdict = f"SKIP ({turn.violation})"
        note = " [rebuilt]" if turn.rebuilt else ""
        click.echo(
            f"  {turn.turn_index:>2}. {turn.raw_text}  ->  {verdict}  "
            f"(feasible {turn.feasible_size_after}){note}"
        )
    if transcript.guess:
        outcome = metrics.score_episode(transcript).outcome.value
        click.echo(f"  guess: #{transcript.guess.index} -> {outcome}")
    else:
        click.echo(f"  no guess ({transcript.status})")


if __name__ == "__main__":
    sys.exit(main())
