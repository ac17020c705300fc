"""Corpus construction: annotation parsing, region extraction, task datasets.

Coordinate conventions: GenBank locations are 1-based inclusive, BED-like
TSV rows are 0-based half-open; everything is normalized to 1-based
inclusive internally.
"""
from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import (
    BadRow,
    InsufficientData,
    MalformedLocation,
    MissingOrigin,
    UnknownSequenceId,
)
from .seqcore import NucleotideSequence, reverse_complement, split_on_n, validate

FEATURE_TYPES = ("CDS", "pseudo", "tRNA", "rRNA", "ncRNA", "miscRNA", "gene")
TAXON_GROUPS = (
    "protozoa",
    "fungi",
    "plant",
    "invertebrate",
    "mammalian",
    "vertebrate_other",
)


@dataclass(frozen=True)
class AnnotationRecord:
    seq_id: str
    start: int  # 1-based inclusive
    end: int
    strand: str  # '+' or '-'
    feature_type: str = "gene"
    taxon_group: Optional[str] = None

    def __post_init__(self):
        if self.start < 1 or self.end < self.start:
            raise ValueError(f"bad interval {self.start}..{self.end}")
        if self.strand not in ("+", "-"):
            raise ValueError(f"bad strand {self.strand!r}")
        if self.feature_type not in FEATURE_TYPES:
            raise ValueError(f"unknown feature type {self.feature_type!r}")

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class FunctionalRegion:
    source: AnnotationRecord
    sequence: NucleotideSequence  # reverse-complemented for minus strand

    @property
    def taxon_group(self) -> Optional[str]:
        return self.source.taxon_group


# --- GenBank flat file -------------------------------------------------------

_SPAN_RE = re.compile(r"^<?(\d+)\.\.>?(\d+)$")


def _parse_location(loc: str, line: str) -> tuple[int, int, str]:
    """Reduce a gene location to (start, end, strand).

    join(...) collapses to the outer span [min, max]: gene-centric regions
    keep intervening introns.
    """
    strand = "+"
    loc = loc.strip()
    if loc.startswith("complement(") and loc.endswith(")"):
        strand = "-"
        loc = loc[len("complement(") : -1]
    if loc.startswith("join(") and loc.endswith(")"):
        loc = loc[len("join(") : -1]
    starts, ends = [], []
    for part in loc.split(","):
        part = part.strip()
        m = _SPAN_RE.match(part)
        if m:
            starts.append(int(m.group(1)))
            ends.append(int(m.group(2)))
        elif part.isdigit():
            starts.append(int(part))
            ends.append(int(part))
        else:
            raise MalformedLocation(line)
    if not starts:
        raise MalformedLocation(line)
    return min(starts), max(ends), strand


def parse_genbank(path) -> tuple[dict[str, NucleotideSequence], list[AnnotationRecord]]:
    """Parse LOCUS/FEATURES/ORIGIN records; keep `gene` features only."""
    sequences: dict[str, NucleotideSequence] = {}
    records: list[AnnotationRecord] = []
    with open(path) as fh:
        lines = fh.read().splitlines()

    i = 0
    while i < len(lines):
        if not lines[i].startswith("LOCUS"):
            i += 1
            continue
        locus_id = lines[i].split()[1]
        i += 1
        pending: list[tuple[str, str]] = []  # (location text, source line)
        origin_parts: list[str] = []
        saw_origin = False
        in_features = False
        while i < len(lines) and not lines[i].startswith("LOCUS"):
            line = lines[i]
            if line.startswith("FEATURES"):
                in_features = True
            elif line.startswith("ORIGIN"):
                saw_origin = True
                in_features = False
                i += 1
                while i < len(lines) and not lines[i].startswith("//") and not lines[i].startswith("LOCUS"):
                    origin_parts.append(re.sub(r"[\d\s]", "", lines[i]))
                    i += 1
                continue
            elif in_features:
                stripped = line.strip()
                if line.startswith("     ") and not line.startswith("      " * 3):
                    parts = stripped.split(None, 1)
                    if len(parts) == 2 and not parts[0].startswith("/"):
                        key, loc = parts
                        # location may continue on following indented lines
                        j = i + 1
                        while j < len(lines) and lines[j].startswith(" " * 10) and not lines[j].strip().startswith("/"):
                            loc += lines[j].strip()
                            j += 1
                        i = j - 1
                        if key == "gene":
                            pending.append((loc, line.strip()))
            i += 1
        if not saw_origin:
            raise MissingOrigin(f"record {locus_id} has no ORIGIN section")
        seq = validate("".join(origin_parts), id=locus_id)
        sequences[locus_id] = seq
        for loc, src_line in pending:
            start, end, strand = _parse_location(loc, src_line)
            if end > len(seq):
                raise MalformedLocation(src_line)
            records.append(
                AnnotationRecord(seq_id=locus_id, start=start, end=end, strand=strand)
            )
    return sequences, records


def parse_genbank_genes(path) -> list[AnnotationRecord]:
    return parse_genbank(path)[1]


# --- BED-like TSV ------------------------------------------------------------

def parse_bed_like(path) -> list[AnnotationRecord]:
    """seq_id, start, end, strand, feature_type[, taxon_group]; BED 0-based half-open."""
    records = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) < 5:
                raise BadRow(line_no, f"expected >=5 columns, got {len(cols)}")
            seq_id, start_s, end_s, strand, feature = cols[:5]
            taxon = cols[5] if len(cols) > 5 and cols[5] else None
            try:
                start0, end0 = int(start_s), int(end_s)
            except ValueError:
                raise BadRow(line_no, "non-integer coordinates")
            if end0 <= start0 or start0 < 0:
                raise BadRow(line_no, f"bad interval {start0}..{end0}")
            if strand not in ("+", "-"):
                raise BadRow(line_no, f"bad strand {strand!r}")
            if feature not in FEATURE_TYPES:
                raise BadRow(line_no, f"unknown feature type {feature!r}")
            if taxon is not None and taxon not in TAXON_GROUPS:
                raise BadRow(line_no, f"unknown taxon group {taxon!r}")
            records.append(
                AnnotationRecord(
                    seq_id=seq_id,
                    start=start0 + 1,
                    end=end0,
                    strand=strand,
                    feature_type=feature,
                    taxon_group=taxon,
                )
            )
    return records


# --- extraction --------------------------------------------------------------

def extract_functional_regions(
    genome: dict[str, NucleotideSequence],
    annotations: Iterable[AnnotationRecord],
    min_subregion: int = 8,
) -> list[FunctionalRegion]:
    """Extract annotated regions; minus strand is reverse-complemented.

    Regions containing N are split into maximal N-free subregions; pieces
    shorter than min_subregion are dropped.
    """
    out = []
    for rec in annotations:
        if rec.seq_id not in genome:
            raise UnknownSequenceId(rec.seq_id)
        contig = genome[rec.seq_id]
        if rec.end > len(contig):
            raise ValueError(
                f"annotation {rec.seq_id}:{rec.start}..{rec.end} exceeds contig length {len(contig)}"
            )
        piece = NucleotideSequence(
            contig.bases[rec.start - 1 : rec.end],
            id=f"{rec.seq_id}:{rec.start}-{rec.end}({rec.strand})",
            meta={
                k: v
                for k, v in (
                    ("taxon_group", rec.taxon_group),
                    ("feature_type", rec.feature_type),
                )
                if v
            },
        )
        if rec.strand == "-":
            piece = reverse_complement(piece)
        if piece.has_n():
            for sub in split_on_n(piece, min_len=min_subregion):
                out.append(FunctionalRegion(source=rec, sequence=sub))
        else:
            out.append(FunctionalRegion(source=rec, sequence=piece))
    return out


# --- corpus statistics -------------------------------------------------------

@dataclass
class CorpusStats:
    counts: dict[tuple[str, str], tuple[int, int]] = field(default_factory=dict)

    def add(self, taxon: str, feature: str, nucleotides: int) -> None:
        genes, nt = self.counts.get((taxon, feature), (0, 0))
        self.counts[(taxon, feature)] = (genes + 1, nt + nucleotides)

    @property
    def total_genes(self) -> int:
        return sum(g for g, _ in self.counts.values())

    @property
    def total_nucleotides(self) -> int:
        return sum(n for _, n in self.counts.values())

    def to_tsv(self) -> str:
        lines = ["#taxon_group\tfeature_type\tgenes\tnucleotides"]
        for (taxon, feature), (genes, nt) in sorted(self.counts.items()):
            lines.append(f"{taxon}\t{feature}\t{genes}\t{nt}")
        lines.append(f"total\t-\t{self.total_genes}\t{self.total_nucleotides}")
        return "\n".join(lines) + "\n"


def corpus_stats(regions: Iterable[FunctionalRegion]) -> CorpusStats:
    stats = CorpusStats()
    for region in regions:
        stats.add(
            region.source.taxon_group or "unlabeled",
            region.source.feature_type,
            len(region.sequence),
        )
    return stats


# --- task dataset construction -----------------------------------------------

@dataclass
class GenerTaskConfig:
    per_class_n: int = 10
    gene_min_len: int = 100
    gene_max_len: int = 5000
    window_len: int = 96_000
    per_group_windows: int = 10
    intergenic_margin: int = 1000
    seed: int = 0


@dataclass
class GenerTaskDatasets:
    gene_items: list[tuple[str, str]]  # (sequence, gene-type label)
    taxon_items: list[tuple[str, str]]  # (sequence, taxon-group label)
    skipped_contigs: int  # contigs shorter than the window length


def _sample_intergenic(
    genome: dict[str, NucleotideSequence],
    annotations: list[AnnotationRecord],
    length: int,
    count: int,
    margin: int,
    rng: random.Random,
) -> list[str]:
    """Uniform positions at least `margin` away from any gene span."""
    spans: dict[str, list[tuple[int, int]]] = {}
    for rec in annotations:
        spans.setdefault(rec.seq_id, []).append(
            (rec.start - margin, rec.end + margin)
        )
    candidates = []
    for seq_id, contig in sorted(genome.items()):
        blocked = spans.get(seq_id, [])
        for start in range(1, len(contig) - length + 2):
            end = start + length - 1
            if any(s <= end and start <= e for s, e in blocked):
                continue
            candidates.append((seq_id, start))
    if len(candidates) < count:
        raise InsufficientData("control", count, len(candidates))
    picks = rng.sample(candidates, count)
    return [
        genome[seq_id].bases[start - 1 : start - 1 + length]
        for seq_id, start in sorted(picks)
    ]


def build_gener_task_datasets(
    regions: list[FunctionalRegion],
    genome: dict[str, NucleotideSequence],
    annotations: list[AnnotationRecord],
    config: GenerTaskConfig,
) -> GenerTaskDatasets:
    """Balanced gene-type and taxon classification datasets.

    Gene task: per (feature_type) balanced samples of length-eligible
    regions plus `control` sequences from intergenic space. Taxon task:
    fixed-length windows balanced across taxon groups; contigs shorter
    than the window are skipped and counted.
    """
    rng = random.Random(config.seed)

    by_type: dict[str, list[FunctionalRegion]] = {}
    by_taxon: dict[str, list[FunctionalRegion]] = {}
    for region in regions:
        if config.gene_min_len <= len(region.sequence) <= config.gene_max_len:
            by_type.setdefault(region.source.feature_type, []).append(region)
        if region.taxon_group:
            by_taxon.setdefault(region.taxon_group, []).append(region)

    gene_items: list[tuple[str, str]] = []
    for feature in sorted(by_type):
        pool = by_type[feature]
        if len(pool) < config.per_class_n:
            raise InsufficientData(feature, config.per_class_n, len(pool))
        picks = rng.sample(range(len(pool)), config.per_class_n)
        for idx in sorted(picks):
            gene_items.append((pool[idx].sequence.bases, feature))
    control_len = min(
        config.gene_max_len,
        max(
            config.gene_min_len,
            max((len(r.sequence) for r in regions), default=config.gene_min_len),
        ),
    )
    for bases in _sample_intergenic(
        genome, annotations, control_len, config.per_class_n, config.intergenic_margin, rng
    ):
        gene_items.append((bases, "control"))

    taxon_items: list[tuple[str, str]] = []
    skipped = 0
    contig_taxon: dict[str, str] = {}
    for rec in annotations:
        if rec.taxon_group:
            contig_taxon[rec.seq_id] = rec.taxon_group
    windows_by_group: dict[str, list[str]] = {}
    for seq_id, contig in sorted(genome.items()):
        group = contig_taxon.get(seq_id) or contig.meta.get("taxon_group")
        if group is None:
            continue
        if len(contig) < config.window_len:
            skipped += 1
            continue
        n_windows = len(contig) // config.window_len
        for w in range(n_windows):
            windows_by_group.setdefault(group, []).append(
                contig.bases[w * config.window_len : (w + 1) * config.window_len]
            )
    for group in sorted(windows_by_group):
        pool = windows_by_group[group]
        if len(pool) < config.per_group_windows:
            raise InsufficientData(group, config.per_group_windows, len(pool))
        picks = rng.sample(range(len(pool)), config.per_group_windows)
        for idx in sorted(picks):
            taxon_items.append((pool[idx], group))

    return GenerTaskDatasets(
        gene_items=gene_items, taxon_items=taxon_items, skipped_contigs=skipped
    )


def write_dataset_tsv(path, items: list[tuple[str, str]]) -> None:
    with open(path, "w") as fh:
        fh.write("#sequence\tlabel\n")
        for seq, label in items:
            fh.write(f"{seq}\t{label}\n")
