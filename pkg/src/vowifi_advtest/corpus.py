"""End-to-end corpus build: properties -> PTCs -> ATCs -> manifest."""

from dataclasses import dataclass

from . import testgen, transformer


@dataclass
class Corpus:
    ptcs: list
    errors: list
    atcs: list
    manifest: dict
    config: transformer.MutationConfig

    @property
    def issues(self):
        return self.manifest["issues"]


def build_corpus(properties=None, config=None, flow=None):
    """Defaults to the shipped properties, mutation config and flow graph."""
    props = testgen.load_properties() if properties is None else properties
    cfg = transformer.load_config() if config is None else config
    graph = flow or testgen.build_flow_graph()
    ptcs, errors = testgen.encode_corpus(props, graph)
    atcs = transformer.generate_corpus(ptcs, cfg)
    return Corpus(ptcs, errors, atcs, transformer.build_manifest(atcs, cfg), cfg)
