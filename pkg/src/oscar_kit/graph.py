"""Graphviz DOT rendering of a discovery result."""

from __future__ import annotations

from .core import CausalEdge, EventVocabulary, LabelCatalog, LabeledSequence

EXCITE = "#d62728"
INHIBIT = "#e377c2"


def _quote(text: str) -> str:
    return '"' + str(text).replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(result, vocab: EventVocabulary, catalog: LabelCatalog, name: str = "oscar") -> str:
    """Event occurrences on a timeline, labels as boxes, one edge per retained cause.

    Edges are red when the indicator is positive (the event raises the
    label's probability) and pink when negative; pen width grows with CMI.
    """
    return render_dot(result.sequence, result.edges(), vocab, catalog, name)


def edges_from_json(record: dict, vocab: EventVocabulary, catalog: LabelCatalog) -> list[CausalEdge]:
    """Inverse of the per-label ``edges`` lists in a discovery JSON record."""
    out = []
    for j, label in enumerate(catalog.names):
        for e in record.get(label, {}).get("edges", []):
            out.append(CausalEdge(int(e["pos"]), vocab.encode(e["event"]), j, float(e["cmi"]),
                                  float(e["ind_mean"]), float(e["ind_std"])))
    return out


def render_dot(seq: LabeledSequence, edges, vocab: EventVocabulary, catalog: LabelCatalog,
               name: str = "oscar") -> str:
    lines = [f"digraph {_quote(name)} {{", "  rankdir=LR;", "  node [fontname=Helvetica];"]
    lines.append("  subgraph cluster_events {")
    lines.append('    label="events"; style=dashed;')
    for ev in seq.events:
        lines.append(f"    e{ev.step} [label={_quote(f'{ev.step}: {vocab.decode(ev.event)}')}, shape=ellipse];")
    for a, b in zip(seq.events, seq.events[1:]):
        lines.append(f"    e{a.step} -> e{b.step} [color=gray70, arrowhead=none];")
    lines.append("  }")
    for j, label in enumerate(catalog.names):
        style = "filled" if seq.labels[j] else "solid"
        lines.append(f"  y{j} [label={_quote(label)}, shape=box, style={style}, fillcolor=lightgoldenrod1];")
    cmax = max((e.cmi for e in edges), default=1.0) or 1.0
    for e in edges:
        color = EXCITE if e.indicator_mean >= 0 else INHIBIT
        width = 1.0 + 3.0 * e.cmi / cmax
        tip = f"cmi={e.cmi:.4g} ind={e.indicator_mean:+.3f}±{e.indicator_std:.3f}"
        lines.append(f"  e{e.step} -> y{e.label} [color={_quote(color)}, penwidth={width:.2f}, "
                     f"label={_quote(f'{e.indicator_mean:+.2f}')}, tooltip={_quote(tip)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
