"""Shared fixtures: a grid-aligned scene and a small model configuration."""

import pytest

from src.config import Config
from src.config_models import GenConfig
from src.scenes import Entity, Relationship, Scene, Vocabulary


def aligned_scene(scene_id: str = "aligned") -> Scene:
    """28-pixel scene whose boxes sit on 2-pixel cell boundaries of a 14 grid."""
    entities = (Entity(0, (4, 4, 10, 10)), Entity(1, (18, 16, 24, 22)))
    return Scene(scene_id, 28, 28, entities, (Relationship(0, 0, 1),), 0)


@pytest.fixture
def vocabulary():
    return Vocabulary.from_config(GenConfig())


@pytest.fixture
def scene():
    return aligned_scene()


@pytest.fixture
def small_config():
    """Oracle encoder with a light shift stack so model tests stay quick."""
    return Config.from_dict(
        {
            "generation": {"image_size": 28, "train_size": 4, "val_size": 2, "test_size": 2},
            "model": {"kernel_size": 5, "shift_layers": 3, "shift_channels": 3},
            "training": {"iterations": 2, "batch_size": 4, "epochs": 2, "seed": 3},
        }
    )
