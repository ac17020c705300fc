import random

import pytest

from genomelm.errors import (
    BadRow,
    InsufficientData,
    MalformedLocation,
    MissingOrigin,
    UnknownSequenceId,
)
from genomelm.ingest import (
    AnnotationRecord,
    GenerTaskConfig,
    build_gener_task_datasets,
    corpus_stats,
    extract_functional_regions,
    parse_bed_like,
    parse_genbank,
)
from genomelm.seqcore import NucleotideSequence, reverse_complement

GENOME_60 = "ACGTACGTACCCGGTTAACCGGATCCGGAATTCCGGAACCTTGGAACCTTGGACGTACGT"


def _origin_lines(bases):
    lines = []
    for i in range(0, len(bases), 60):
        row = bases[i : i + 60].lower()
        chunks = " ".join(row[j : j + 10] for j in range(0, len(row), 10))
        lines.append(f"{i + 1:>9} {chunks}")
    return "\n".join(lines)


def _write_genbank(path, locus_id, bases, feature_lines):
    features = "\n".join(feature_lines)
    path.write_text(
        f"LOCUS       {locus_id}             {len(bases)} bp    DNA\n"
        "FEATURES             Location/Qualifiers\n"
        f"{features}\n"
        "ORIGIN\n"
        f"{_origin_lines(bases)}\n"
        "//\n"
    )


class TestGenbank:
    def test_three_genes_exact_intervals(self, tmp_path):
        path = tmp_path / "rec.gb"
        _write_genbank(
            path,
            "CTG1",
            GENOME_60,
            [
                "     gene            4..12",
                '                     /gene="g1"',
                "     gene            complement(20..28)",
                "     gene            join(31..35,41..46)",
            ],
        )
        sequences, records = parse_genbank(path)
        assert sequences["CTG1"].bases == GENOME_60
        assert [(r.start, r.end, r.strand) for r in records] == [
            (4, 12, "+"),
            (20, 28, "-"),
            (31, 46, "+"),  # join collapses to the outer span
        ]

    def test_non_gene_features_are_ignored(self, tmp_path):
        path = tmp_path / "rec.gb"
        _write_genbank(
            path,
            "CTG1",
            GENOME_60,
            [
                "     source          1..60",
                "     CDS             4..12",
                "     gene            4..12",
            ],
        )
        _, records = parse_genbank(path)
        assert len(records) == 1

    def test_multi_record_file(self, tmp_path):
        path = tmp_path / "two.gb"
        one = (
            f"LOCUS       A1             60 bp    DNA\n"
            "FEATURES             Location/Qualifiers\n"
            "     gene            1..8\n"
            "ORIGIN\n"
            f"{_origin_lines(GENOME_60)}\n"
            "//\n"
        )
        two = (
            f"LOCUS       B2             60 bp    DNA\n"
            "FEATURES             Location/Qualifiers\n"
            "     gene            complement(2..9)\n"
            "ORIGIN\n"
            f"{_origin_lines(GENOME_60)}\n"
            "//\n"
        )
        path.write_text(one + two)
        sequences, records = parse_genbank(path)
        assert set(sequences) == {"A1", "B2"}
        assert [(r.seq_id, r.strand) for r in records] == [("A1", "+"), ("B2", "-")]

    def test_missing_origin_raises(self, tmp_path):
        path = tmp_path / "bad.gb"
        path.write_text(
            "LOCUS       NOORI             60 bp    DNA\n"
            "FEATURES             Location/Qualifiers\n"
            "     gene            1..8\n"
            "//\n"
        )
        with pytest.raises(MissingOrigin):
            parse_genbank(path)

    def test_malformed_location_raises(self, tmp_path):
        path = tmp_path / "bad.gb"
        _write_genbank(path, "CTG1", GENOME_60, ["     gene            4..twelve"])
        with pytest.raises(MalformedLocation):
            parse_genbank(path)

    def test_location_beyond_contig_raises(self, tmp_path):
        path = tmp_path / "bad.gb"
        _write_genbank(path, "CTG1", GENOME_60, ["     gene            4..99"])
        with pytest.raises(MalformedLocation):
            parse_genbank(path)


class TestBedLike:
    def test_half_open_converts_to_one_based_inclusive(self, tmp_path):
        path = tmp_path / "ann.tsv"
        path.write_text(
            "#seq\tstart\tend\tstrand\tfeature\ttaxon\n"
            "chr1\t0\t10\t+\tgene\tfungi\n"
            "chr1\t9\t12\t-\tCDS\n"
        )
        records = parse_bed_like(path)
        assert (records[0].start, records[0].end) == (1, 10)
        assert (records[1].start, records[1].end) == (10, 12)
        assert records[0].taxon_group == "fungi"
        assert records[1].taxon_group is None

    @pytest.mark.parametrize(
        "row",
        [
            "chr1\t0\t10\t+",  # too few columns
            "chr1\tzero\t10\t+\tgene",
            "chr1\t10\t10\t+\tgene",  # empty interval
            "chr1\t-1\t10\t+\tgene",
            "chr1\t0\t10\t*\tgene",
            "chr1\t0\t10\t+\tpromoter",
            "chr1\t0\t10\t+\tgene\tmartian",
        ],
    )
    def test_bad_rows_raise_with_line_number(self, tmp_path, row):
        path = tmp_path / "ann.tsv"
        path.write_text("# header\n" + row + "\n")
        with pytest.raises(BadRow) as exc:
            parse_bed_like(path)
        assert exc.value.line_no == 2


class TestExtraction:
    def test_strands_and_intervals(self):
        genome = {"c": NucleotideSequence(GENOME_60, id="c")}
        plus = AnnotationRecord("c", 4, 12, "+")
        minus = AnnotationRecord("c", 20, 28, "-")
        regions = extract_functional_regions(genome, [plus, minus])
        assert regions[0].sequence.bases == GENOME_60[3:12]
        assert (
            regions[1].sequence.bases
            == reverse_complement(NucleotideSequence(GENOME_60[19:28])).bases
        )

    def test_n_regions_split_with_min_length(self):
        genome = {"c": NucleotideSequence("AAAACCCCNNGGGGTTTTNGG")}
        rec = AnnotationRecord("c", 1, 21, "+")
        regions = extract_functional_regions(genome, [rec], min_subregion=4)
        assert [r.sequence.bases for r in regions] == ["AAAACCCC", "GGGGTTTT"]

    def test_unknown_contig_raises(self):
        with pytest.raises(UnknownSequenceId):
            extract_functional_regions({}, [AnnotationRecord("zzz", 1, 4, "+")])

    def test_annotation_past_contig_end_raises(self):
        genome = {"c": NucleotideSequence("ACGT")}
        with pytest.raises(ValueError):
            extract_functional_regions(genome, [AnnotationRecord("c", 1, 9, "+")])


class TestStats:
    def test_hand_counts(self):
        genome = {"c": NucleotideSequence(GENOME_60)}
        records = [
            AnnotationRecord("c", 1, 10, "+", "gene", "fungi"),
            AnnotationRecord("c", 11, 16, "+", "gene", "fungi"),
            AnnotationRecord("c", 21, 28, "-", "CDS", "plant"),
        ]
        stats = corpus_stats(extract_functional_regions(genome, records))
        assert stats.counts[("fungi", "gene")] == (2, 16)
        assert stats.counts[("plant", "CDS")] == (1, 8)
        assert stats.total_genes == 3
        assert stats.total_nucleotides == 24
        tsv = stats.to_tsv()
        assert "fungi\tgene\t2\t16" in tsv
        assert tsv.endswith("total\t-\t3\t24\n")


def _task_fixture():
    rng = random.Random(5)
    contigs = {}
    annotations = []
    for name, taxon in (("c1", "fungi"), ("c2", "plant")):
        bases = "".join(rng.choice("ACGT") for _ in range(400))
        contigs[name] = NucleotideSequence(bases, id=name)
        # genes packed at the front; the back stays intergenic
        for g in range(3):
            start = 10 + 40 * g
            annotations.append(
                AnnotationRecord(name, start, start + 19, "+", "gene", taxon)
            )
    regions = extract_functional_regions(contigs, annotations)
    return regions, contigs, annotations


class TestGenerTasks:
    CONFIG = GenerTaskConfig(
        per_class_n=2,
        gene_min_len=10,
        gene_max_len=30,
        window_len=100,
        per_group_windows=2,
        intergenic_margin=20,
        seed=3,
    )

    def test_balanced_and_labeled(self):
        regions, contigs, annotations = _task_fixture()
        data = build_gener_task_datasets(regions, contigs, annotations, self.CONFIG)
        gene_labels = [label for _, label in data.gene_items]
        assert gene_labels.count("gene") == 2
        assert gene_labels.count("control") == 2
        taxon_labels = [label for _, label in data.taxon_items]
        assert taxon_labels.count("fungi") == 2
        assert taxon_labels.count("plant") == 2
        assert all(len(seq) == 100 for seq, _ in data.taxon_items)
        assert data.skipped_contigs == 0

    def test_controls_keep_their_distance_from_genes(self):
        regions, contigs, annotations = _task_fixture()
        data = build_gener_task_datasets(regions, contigs, annotations, self.CONFIG)
        controls = [seq for seq, label in data.gene_items if label == "control"]
        blocked = []
        for rec in annotations:
            lo = rec.start - self.CONFIG.intergenic_margin
            hi = rec.end + self.CONFIG.intergenic_margin
            blocked.append((rec.seq_id, lo, hi))
        for control in controls:
            placements = []
            for name, contig in contigs.items():
                at = contig.bases.find(control)
                if at >= 0:
                    placements.append((name, at + 1, at + len(control)))
            assert placements, "control not found in any contig"
            assert any(
                all(not (lo <= end and start <= hi)
                    for b_name, lo, hi in blocked if b_name == name)
                for name, start, end in placements
            )

    def test_deterministic_given_seed(self):
        regions, contigs, annotations = _task_fixture()
        a = build_gener_task_datasets(regions, contigs, annotations, self.CONFIG)
        b = build_gener_task_datasets(regions, contigs, annotations, self.CONFIG)
        assert a.gene_items == b.gene_items
        assert a.taxon_items == b.taxon_items

    def test_short_contigs_are_skipped_and_counted(self):
        regions, contigs, annotations = _task_fixture()
        contigs = dict(contigs)
        contigs["c3"] = NucleotideSequence("ACGT" * 10, id="c3")
        annotations = annotations + [
            AnnotationRecord("c3", 1, 8, "+", "gene", "fungi")
        ]
        regions = extract_functional_regions(contigs, annotations)
        data = build_gener_task_datasets(regions, contigs, annotations, self.CONFIG)
        assert data.skipped_contigs == 1

    def test_insufficient_pool_raises(self):
        regions, contigs, annotations = _task_fixture()
        config = GenerTaskConfig(
            per_class_n=50,
            gene_min_len=10,
            gene_max_len=30,
            window_len=100,
            per_group_windows=2,
            intergenic_margin=20,
        )
        with pytest.raises(InsufficientData):
            build_gener_task_datasets(regions, contigs, annotations, config)
