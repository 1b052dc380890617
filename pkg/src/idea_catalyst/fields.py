"""The 23 coarse scholarly fields used for retrieval, and fine-to-coarse mapping."""

from __future__ import annotations

from enum import Enum


class MappingError(Exception):
    """A fine-grained domain name could not be mapped to a coarse field."""


class CoarseField(str, Enum):
    """Closed vocabulary of coarse fields recognized by the snippet service."""

    COMPUTER_SCIENCE = "Computer Science"
    MEDICINE = "Medicine"
    CHEMISTRY = "Chemistry"
    BIOLOGY = "Biology"
    MATERIALS_SCIENCE = "Materials Science"
    PHYSICS = "Physics"
    GEOLOGY = "Geology"
    PSYCHOLOGY = "Psychology"
    ART = "Art"
    HISTORY = "History"
    GEOGRAPHY = "Geography"
    SOCIOLOGY = "Sociology"
    BUSINESS = "Business"
    POLITICAL_SCIENCE = "Political Science"
    ECONOMICS = "Economics"
    PHILOSOPHY = "Philosophy"
    MATHEMATICS = "Mathematics"
    ENGINEERING = "Engineering"
    ENVIRONMENTAL_SCIENCE = "Environmental Science"
    AGRICULTURAL_AND_FOOD_SCIENCES = "Agricultural and Food Sciences"
    EDUCATION = "Education"
    LAW = "Law"
    LINGUISTICS = "Linguistics"

    @classmethod
    def from_label(cls, label: str) -> "CoarseField":
        """Parse an exact coarse-field name (case-insensitive). Unknown names are rejected."""
        needle = _normalize(label)
        for member in cls:
            if _normalize(member.value) == needle:
                return member
        raise MappingError(f"not a coarse field: {label!r}")

    @classmethod
    def labels(cls) -> tuple[str, ...]:
        return tuple(member.value for member in cls)


def _normalize(name: str) -> str:
    return " ".join(name.lower().replace("-", " ").replace("_", " ").split())


# Common fine-grained subfields. Keys are normalized via _normalize.
_FINE_TO_COARSE: dict[str, CoarseField] = {
    # Computer Science
    "natural language processing": CoarseField.COMPUTER_SCIENCE,
    "nlp": CoarseField.COMPUTER_SCIENCE,
    "multilingual nlp": CoarseField.COMPUTER_SCIENCE,
    "multilingual semantics": CoarseField.COMPUTER_SCIENCE,
    "computational linguistics": CoarseField.LINGUISTICS,
    "machine learning": CoarseField.COMPUTER_SCIENCE,
    "deep learning": CoarseField.COMPUTER_SCIENCE,
    "reinforcement learning": CoarseField.COMPUTER_SCIENCE,
    "computer vision": CoarseField.COMPUTER_SCIENCE,
    "artificial intelligence": CoarseField.COMPUTER_SCIENCE,
    "neural and evolutionary computing": CoarseField.COMPUTER_SCIENCE,
    "human computer interaction": CoarseField.COMPUTER_SCIENCE,
    "hci": CoarseField.COMPUTER_SCIENCE,
    "information retrieval": CoarseField.COMPUTER_SCIENCE,
    "data mining": CoarseField.COMPUTER_SCIENCE,
    "databases": CoarseField.COMPUTER_SCIENCE,
    "robotics": CoarseField.COMPUTER_SCIENCE,
    "software engineering": CoarseField.COMPUTER_SCIENCE,
    "cryptography": CoarseField.COMPUTER_SCIENCE,
    "operating systems": CoarseField.COMPUTER_SCIENCE,
    "distributed systems": CoarseField.COMPUTER_SCIENCE,
    "model interpretability": CoarseField.COMPUTER_SCIENCE,
    "user simulation": CoarseField.COMPUTER_SCIENCE,
    "speech processing": CoarseField.COMPUTER_SCIENCE,
    # Psychology
    "cognitive science": CoarseField.PSYCHOLOGY,
    "cognitive psychology": CoarseField.PSYCHOLOGY,
    "behavioral psychology": CoarseField.PSYCHOLOGY,
    "social psychology": CoarseField.PSYCHOLOGY,
    "animal learning": CoarseField.PSYCHOLOGY,
    "developmental psychology": CoarseField.PSYCHOLOGY,
    "educational psychology": CoarseField.PSYCHOLOGY,
    # Engineering
    "control theory": CoarseField.ENGINEERING,
    "control engineering": CoarseField.ENGINEERING,
    "electrical engineering": CoarseField.ENGINEERING,
    "in memory computing": CoarseField.ENGINEERING,
    "mechanical engineering": CoarseField.ENGINEERING,
    "signal processing": CoarseField.ENGINEERING,
    "aerospace engineering": CoarseField.ENGINEERING,
    "civil engineering": CoarseField.ENGINEERING,
    # Mathematics
    "statistics": CoarseField.MATHEMATICS,
    "probability theory": CoarseField.MATHEMATICS,
    "optimization": CoarseField.MATHEMATICS,
    "number theory": CoarseField.MATHEMATICS,
    "topology": CoarseField.MATHEMATICS,
    "applied mathematics": CoarseField.MATHEMATICS,
    "dynamical systems": CoarseField.MATHEMATICS,
    # Physics
    "quantum computing": CoarseField.PHYSICS,
    "condensed matter physics": CoarseField.PHYSICS,
    "astrophysics": CoarseField.PHYSICS,
    "statistical mechanics": CoarseField.PHYSICS,
    "optics": CoarseField.PHYSICS,
    # Biology
    "neuroscience": CoarseField.BIOLOGY,
    "computational neuroscience": CoarseField.BIOLOGY,
    "genetics": CoarseField.BIOLOGY,
    "ecology": CoarseField.BIOLOGY,
    "evolutionary biology": CoarseField.BIOLOGY,
    "bioinformatics": CoarseField.BIOLOGY,
    "microbiology": CoarseField.BIOLOGY,
    "systems biology": CoarseField.BIOLOGY,
    # Medicine
    "epidemiology": CoarseField.MEDICINE,
    "public health": CoarseField.MEDICINE,
    "clinical medicine": CoarseField.MEDICINE,
    "immunology": CoarseField.MEDICINE,
    "radiology": CoarseField.MEDICINE,
    # Chemistry
    "organic chemistry": CoarseField.CHEMISTRY,
    "biochemistry": CoarseField.CHEMISTRY,
    "physical chemistry": CoarseField.CHEMISTRY,
    "electrochemistry": CoarseField.CHEMISTRY,
    # Materials Science
    "materials engineering": CoarseField.MATERIALS_SCIENCE,
    "nanomaterials": CoarseField.MATERIALS_SCIENCE,
    "polymer science": CoarseField.MATERIALS_SCIENCE,
    "metallurgy": CoarseField.MATERIALS_SCIENCE,
    # Economics
    "behavioral economics": CoarseField.ECONOMICS,
    "game theory": CoarseField.ECONOMICS,
    "econometrics": CoarseField.ECONOMICS,
    "microeconomics": CoarseField.ECONOMICS,
    "macroeconomics": CoarseField.ECONOMICS,
    # Sociology
    "social theory": CoarseField.SOCIOLOGY,
    "anthropology": CoarseField.SOCIOLOGY,
    "demography": CoarseField.SOCIOLOGY,
    "organizational sociology": CoarseField.SOCIOLOGY,
    # Political Science
    "international relations": CoarseField.POLITICAL_SCIENCE,
    "political theory": CoarseField.POLITICAL_SCIENCE,
    "public policy": CoarseField.POLITICAL_SCIENCE,
    # Philosophy
    "ethics": CoarseField.PHILOSOPHY,
    "epistemology": CoarseField.PHILOSOPHY,
    "philosophy of science": CoarseField.PHILOSOPHY,
    "logic": CoarseField.PHILOSOPHY,
    # Linguistics
    "syntax": CoarseField.LINGUISTICS,
    "phonology": CoarseField.LINGUISTICS,
    "psycholinguistics": CoarseField.LINGUISTICS,
    "sociolinguistics": CoarseField.LINGUISTICS,
    "semantics": CoarseField.LINGUISTICS,
    # Business
    "finance": CoarseField.BUSINESS,
    "marketing": CoarseField.BUSINESS,
    "management": CoarseField.BUSINESS,
    "accounting": CoarseField.BUSINESS,
    "organizational behavior": CoarseField.BUSINESS,
    # Education
    "pedagogy": CoarseField.EDUCATION,
    "curriculum design": CoarseField.EDUCATION,
    "learning sciences": CoarseField.EDUCATION,
    # Environmental Science
    "climate science": CoarseField.ENVIRONMENTAL_SCIENCE,
    "sustainability": CoarseField.ENVIRONMENTAL_SCIENCE,
    "conservation": CoarseField.ENVIRONMENTAL_SCIENCE,
    # Geology
    "seismology": CoarseField.GEOLOGY,
    "mineralogy": CoarseField.GEOLOGY,
    "paleontology": CoarseField.GEOLOGY,
    "hydrology": CoarseField.GEOLOGY,
    # Geography
    "cartography": CoarseField.GEOGRAPHY,
    "urban planning": CoarseField.GEOGRAPHY,
    "remote sensing": CoarseField.GEOGRAPHY,
    # Agricultural and Food Sciences
    "agronomy": CoarseField.AGRICULTURAL_AND_FOOD_SCIENCES,
    "food science": CoarseField.AGRICULTURAL_AND_FOOD_SCIENCES,
    "horticulture": CoarseField.AGRICULTURAL_AND_FOOD_SCIENCES,
    "crop science": CoarseField.AGRICULTURAL_AND_FOOD_SCIENCES,
    # Art
    "art history": CoarseField.ART,
    "visual arts": CoarseField.ART,
    "music": CoarseField.ART,
    "musicology": CoarseField.ART,
    "design": CoarseField.ART,
    "literature": CoarseField.ART,
    # History
    "history of science": CoarseField.HISTORY,
    "archaeology": CoarseField.HISTORY,
    # Law
    "constitutional law": CoarseField.LAW,
    "criminal justice": CoarseField.LAW,
    "jurisprudence": CoarseField.LAW,
    "intellectual property": CoarseField.LAW,
}


class DomainMapper:
    """Maps free-text fine domain names onto the closed coarse-field vocabulary.

    Resolution order: exact coarse name, bundled static table, then an
    optional classifier callback (e.g. an LLM constrained to the 23 fields).
    Without a classifier, unresolved names raise MappingError.
    """

    def __init__(self, classifier=None):
        self._classifier = classifier

    def map(self, fine_domain: str) -> CoarseField:
        if not fine_domain or not fine_domain.strip():
            raise MappingError("empty domain name")
        needle = _normalize(fine_domain)
        for member in CoarseField:
            if _normalize(member.value) == needle:
                return member
        hit = _FINE_TO_COARSE.get(needle)
        if hit is not None:
            return hit
        if self._classifier is None:
            raise MappingError(f"no mapping for domain {fine_domain!r} and no classifier configured")
        label = self._classifier(fine_domain)
        try:
            return CoarseField.from_label(label)
        except MappingError as exc:
            raise MappingError(
                f"classifier returned non-member field {label!r} for {fine_domain!r}"
            ) from exc
