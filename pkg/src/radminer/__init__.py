"""Literature mining for radiological findings: bootstrapped sentence
classification plus frequency-ranked noun-phrase extraction."""

__version__ = "0.1.0"
