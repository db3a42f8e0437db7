"""Tag/attribute label space shared by every other module.

A schema declares the editable tags (hair color, glasses, ...), the ordered
attributes of each tag, and the channel width of the bottleneck the editor
operates in. Indices are 0-based and assigned by declaration order; they are
stable across save/load, which checkpoints rely on.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from pathlib import Path

import yaml


class SchemaError(ValueError):
    """Raised for malformed or inconsistent schema definitions."""


@dataclass(frozen=True)
class TagSpec:
    tag_id: int
    name: str
    attributes: tuple[str, ...]

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)


@dataclass(frozen=True)
class AttributeSchema:
    tags: tuple[TagSpec, ...]
    latent_dim: int
    _tag_index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.latent_dim <= 0:
            raise SchemaError(f"latent_dim must be positive, got {self.latent_dim}")
        names = [t.name for t in self.tags]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate tag names in {names}")
        if not self.tags:
            raise SchemaError("schema declares no tags")
        for tag in self.tags:
            if tag.n_attributes < 2:
                raise SchemaError(
                    f"tag {tag.name!r} has {tag.n_attributes} attribute(s); need at least 2"
                )
            if len(set(tag.attributes)) != tag.n_attributes:
                raise SchemaError(f"duplicate attribute names in tag {tag.name!r}")
        object.__setattr__(self, "_tag_index", {t.name: t.tag_id for t in self.tags})

    @property
    def n_tags(self) -> int:
        return len(self.tags)

    @property
    def attributes_per_tag(self) -> tuple[int, ...]:
        return tuple(t.n_attributes for t in self.tags)

    @property
    def max_attributes(self) -> int:
        return max(self.attributes_per_tag)

    @property
    def total_heads(self) -> int:
        """One discriminator head per (tag, attribute) pair."""
        return sum(self.attributes_per_tag)

    def head_index(self, tag: int, attr: int) -> int:
        """Flat index of the (tag, attribute) head, in declaration order."""
        self.validate_pair(tag, attr)
        return sum(self.attributes_per_tag[:tag]) + attr

    def tag(self, tag: int) -> TagSpec:
        if not 0 <= tag < self.n_tags:
            raise SchemaError(f"tag index {tag} out of range [0, {self.n_tags})")
        return self.tags[tag]

    def validate_pair(self, tag: int, attr: int) -> None:
        spec = self.tag(tag)
        if not 0 <= attr < spec.n_attributes:
            raise SchemaError(
                f"attribute index {attr} out of range for tag {spec.name!r} "
                f"({spec.n_attributes} attributes)"
            )

    def resolve(self, tag_name: str, attr_name: str) -> tuple[int, int]:
        """Map (tag name, attribute name) to stable (tag, attribute) indices."""
        if tag_name not in self._tag_index:
            raise SchemaError(
                f"unknown tag {tag_name!r}; schema has {[t.name for t in self.tags]}"
            )
        tag = self._tag_index[tag_name]
        spec = self.tags[tag]
        try:
            attr = spec.attributes.index(attr_name)
        except ValueError:
            raise SchemaError(
                f"unknown attribute {attr_name!r} for tag {tag_name!r}; "
                f"expected one of {list(spec.attributes)}"
            ) from None
        return tag, attr

    def resolve_tag(self, tag_name: str) -> int:
        if tag_name not in self._tag_index:
            raise SchemaError(
                f"unknown tag {tag_name!r}; schema has {[t.name for t in self.tags]}"
            )
        return self._tag_index[tag_name]

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "latent_dim": self.latent_dim,
            "tags": [{"name": t.name, "attributes": list(t.attributes)} for t in self.tags],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "AttributeSchema":
        try:
            latent_dim = int(payload["latent_dim"])
            raw_tags = payload["tags"]
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"schema document missing or malformed field: {exc}") from exc
        if not isinstance(raw_tags, list):
            raise SchemaError("schema 'tags' must be a list")
        tags = []
        for tag_id, entry in enumerate(raw_tags):
            try:
                name = str(entry["name"])
                attributes = tuple(str(a) for a in entry["attributes"])
            except (KeyError, TypeError) as exc:
                raise SchemaError(f"malformed tag entry {entry!r}: {exc}") from exc
            tags.append(TagSpec(tag_id=tag_id, name=name, attributes=attributes))
        return cls(tags=tuple(tags), latent_dim=latent_dim)


def load_schema(path: str | Path) -> AttributeSchema:
    """Load and validate a schema file (YAML)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read schema file {path}: {exc}") from exc
    try:
        payload = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaError(f"schema file {path} does not parse: {exc}") from exc
    if not isinstance(payload, dict):
        raise SchemaError(f"schema file {path} must contain a mapping at top level")
    return AttributeSchema.from_dict(payload)


def save_schema(schema: AttributeSchema, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(schema.to_dict(), sort_keys=False))


def builtin_schema_path(name: str) -> Path:
    """Path of a schema shipped with the package (setting_a, setting_b, desk)."""
    resource = importlib.resources.files("latshift") / "configs" / f"{name}.schema"
    if not resource.is_file():
        raise SchemaError(f"no builtin schema named {name!r}")
    return Path(str(resource))
