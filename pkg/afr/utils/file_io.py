# -*- coding: utf-8 -*-
"""
Чтение и запись файлов: бинарные контейнеры эмбеддингов (AFRE),
чекпоинтов головы (AFRH) и сетей (AFRM), а также CSV и JSON.
Все числа в little-endian.
"""

import json
import logging
import os
import struct
from typing import Dict, Optional

import numpy as np
import pandas as pd

from afr.errors import InvalidInputError, ParseError
from afr.models.dataset import ERM, SPLIT_CODES, SPLIT_NAMES, EmbeddingDataset
from afr.models.head import LinearHead
from afr.models.mlp import Mlp

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

EMBEDDING_MAGIC = b'AFRE'
HEAD_MAGIC = b'AFRH'
MLP_MAGIC = b'AFRM'

FLAG_HAS_GROUPS = 0b01
FLAG_HAS_SPLITS = 0b10

# magic | version u32 | N u64 | D u64 | C u32 | G u32 | flags u8
_EMBEDDING_HEADER = struct.Struct('<4sIQQIIB')
# magic | version u32 | C u32 | D u32
_HEAD_HEADER = struct.Struct('<4sIII')
# magic | version u32 | layer count u32
_MLP_HEADER = struct.Struct('<4sII')


class _Reader:
    """Последовательное чтение буфера с контролем смещения"""

    def __init__(self, data: bytes, path: Optional[str] = None):
        self.data = data
        self.offset = 0
        self.path = path

    def error(self, message: str, offset: Optional[int] = None) -> ParseError:
        return ParseError(message, self.offset if offset is None else offset, self.path)

    def unpack(self, layout: struct.Struct, what: str):
        if len(self.data) - self.offset < layout.size:
            raise self.error(f"truncated {what}: need {layout.size} bytes, have {len(self.data) - self.offset}")
        values = layout.unpack_from(self.data, self.offset)
        self.offset += layout.size
        return values

    def array(self, dtype: str, count: int, what: str) -> np.ndarray:
        item_size = np.dtype(dtype).itemsize
        need = count * item_size
        if len(self.data) - self.offset < need:
            raise self.error(f"truncated {what}: need {need} bytes, have {len(self.data) - self.offset}")
        values = np.frombuffer(self.data, dtype=dtype, count=count, offset=self.offset)
        self.offset += need
        return values

    def check_magic(self, magic: bytes, version: int, found_magic: bytes):
        if found_magic != magic:
            raise self.error(f"bad magic {found_magic!r}, expected {magic!r}", offset=0)
        if version != FORMAT_VERSION:
            raise self.error(f"unsupported format version {version}, expected {FORMAT_VERSION}", offset=4)

    def finish(self):
        if self.offset != len(self.data):
            raise self.error(f"{len(self.data) - self.offset} unexpected trailing bytes")


def _read_bytes(path: str) -> bytes:
    try:
        with open(path, 'rb') as f:
            return f.read()
    except FileNotFoundError:
        raise ParseError("file not found", 0, path)


def _write_bytes(path: str, payload: bytes):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(payload)


# ---------------------------------------------------------------------------
# Эмбеддинги
# ---------------------------------------------------------------------------

def encode_embeddings(dataset: EmbeddingDataset) -> bytes:
    """Сериализация набора в формат AFRE"""
    flags = FLAG_HAS_SPLITS | (FLAG_HAS_GROUPS if dataset.has_groups else 0)
    parts = [
        _EMBEDDING_HEADER.pack(
            EMBEDDING_MAGIC, FORMAT_VERSION,
            dataset.n_rows, dataset.dim,
            dataset.n_classes, dataset.n_groups if dataset.has_groups else 0,
            flags,
        ),
        dataset.features.astype('<f8').tobytes(order='C'),
        dataset.labels.astype('<u4').tobytes(),
    ]
    if dataset.has_groups:
        parts.append(dataset.groups.astype('<u4').tobytes())
    parts.append(dataset.split_tags.astype('u1').tobytes())
    return b''.join(parts)


def decode_embeddings(data: bytes, path: Optional[str] = None) -> EmbeddingDataset:
    """
    Разбор формата AFRE.

    Args:
        data (bytes): Содержимое файла
        path (str): Путь для сообщений об ошибках

    Returns:
        EmbeddingDataset: Восстановленный набор
    """
    reader = _Reader(data, path)
    magic, version, n_rows, dim, n_classes, n_groups, flags = reader.unpack(_EMBEDDING_HEADER, "header")
    reader.check_magic(EMBEDDING_MAGIC, version, magic)
    flags_offset = _EMBEDDING_HEADER.size - 1
    if flags & ~(FLAG_HAS_GROUPS | FLAG_HAS_SPLITS):
        raise reader.error(f"unknown flag bits 0x{flags:02x}", offset=flags_offset)
    has_groups = bool(flags & FLAG_HAS_GROUPS)
    if has_groups != (n_groups > 0):
        raise reader.error(f"group flag {has_groups} inconsistent with G={n_groups}", offset=flags_offset)

    features = reader.array('<f8', n_rows * dim, "features").reshape(n_rows, dim)
    if not np.all(np.isfinite(features)):
        bad = int(np.flatnonzero(~np.isfinite(features.ravel()))[0])
        raise reader.error("non-finite feature value", offset=_EMBEDDING_HEADER.size + 8 * bad)

    labels_offset = reader.offset
    labels = reader.array('<u4', n_rows, "labels")
    _check_indices(reader, labels, n_classes, labels_offset, 4, "class")

    groups = None
    if has_groups:
        groups_offset = reader.offset
        groups = reader.array('<u4', n_rows, "groups")
        _check_indices(reader, groups, n_groups, groups_offset, 4, "group")

    if flags & FLAG_HAS_SPLITS:
        tags_offset = reader.offset
        split_tags = reader.array('u1', n_rows, "split tags")
        _check_indices(reader, split_tags, len(SPLIT_NAMES), tags_offset, 1, "split tag")
    else:
        split_tags = np.full(n_rows, ERM)
    reader.finish()

    try:
        return EmbeddingDataset(
            features=features,
            labels=labels,
            split_tags=split_tags,
            groups=groups,
            n_classes=n_classes,
            n_groups=n_groups,
        )
    except InvalidInputError as e:
        raise reader.error(str(e), offset=0)


def _check_indices(reader: _Reader, values: np.ndarray, bound: int, start: int, item_size: int, what: str):
    bad = np.flatnonzero(values >= bound)
    if bad.size:
        first = int(bad[0])
        raise reader.error(
            f"{what} index {int(values[first])} out of range [0, {bound})",
            offset=start + item_size * first,
        )


def write_embedding_file(dataset: EmbeddingDataset, path: str):
    """Запись набора в бинарный файл AFRE"""
    _write_bytes(path, encode_embeddings(dataset))
    logger.info(f"💾 Embeddings written to {path} ({dataset.n_rows}×{dataset.dim})")


def read_embedding_file(path: str) -> EmbeddingDataset:
    """Чтение бинарного файла AFRE"""
    dataset = decode_embeddings(_read_bytes(path), path)
    logger.debug(f"Embeddings loaded from {path}: {dataset}")
    return dataset


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def write_embedding_csv(dataset: EmbeddingDataset, path: str):
    """Экспорт набора в CSV: f0..f{D-1}, label, [group], split"""
    frame = pd.DataFrame(dataset.features, columns=[f'f{j}' for j in range(dataset.dim)])
    frame['label'] = dataset.labels
    if dataset.has_groups:
        frame['group'] = dataset.groups
    frame['split'] = [SPLIT_NAMES[t] for t in dataset.split_tags]
    frame.to_csv(path, index=False, float_format='%.17g')


def read_embedding_csv(path: str, n_classes: int = 0, n_groups: int = 0) -> EmbeddingDataset:
    """
    Импорт набора из CSV.

    Args:
        path (str): Путь к CSV с заголовком
        n_classes (int): Число классов (по умолчанию max(label) + 1)
        n_groups (int): Число групп (по умолчанию max(group) + 1)

    Returns:
        EmbeddingDataset: Набор; без колонки split все строки помечены ERM
    """
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError:
        raise ParseError("file not found", 0, path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ParseError(f"malformed CSV: {e}", 1, path)

    feature_columns = [c for c in frame.columns if c.startswith('f') and c[1:].isdigit()]
    expected = [f'f{j}' for j in range(len(feature_columns))]
    if not feature_columns or feature_columns != expected:
        raise ParseError(f"feature columns must be f0..f{{D-1}}, got {feature_columns}", 1, path)
    if 'label' not in frame.columns:
        raise ParseError("missing 'label' column", 1, path)
    unknown = set(frame.columns) - set(feature_columns) - {'label', 'group', 'split'}
    if unknown:
        raise ParseError(f"unknown columns {sorted(unknown)}", 1, path)

    try:
        features = frame[feature_columns].to_numpy(dtype=np.float64)
        labels = frame['label'].to_numpy(dtype=np.int64)
        groups = frame['group'].to_numpy(dtype=np.int64) if 'group' in frame.columns else None
    except (TypeError, ValueError) as e:
        raise ParseError(f"non-numeric value: {e}", 1, path)

    if 'split' in frame.columns:
        tags = []
        for row, name in enumerate(frame['split']):
            code = SPLIT_CODES.get(str(name).upper())
            if code is None:
                # строка 1: заголовок
                raise ParseError(f"unknown split tag '{name}'", row + 2, path)
            tags.append(code)
        split_tags = np.array(tags, dtype=np.int64)
    else:
        split_tags = np.full(len(frame), ERM)

    try:
        return EmbeddingDataset(features, labels, split_tags, groups, n_classes=n_classes, n_groups=n_groups)
    except InvalidInputError as e:
        raise ParseError(str(e), 1, path)


# ---------------------------------------------------------------------------
# Чекпоинты головы и сети
# ---------------------------------------------------------------------------

def encode_head(head: LinearHead) -> bytes:
    return b''.join([
        _HEAD_HEADER.pack(HEAD_MAGIC, FORMAT_VERSION, head.n_classes, head.dim),
        head.weights.astype('<f8').tobytes(order='C'),
        head.bias.astype('<f8').tobytes(),
        head.anchor_weights.astype('<f8').tobytes(order='C'),
        head.anchor_bias.astype('<f8').tobytes(),
    ])


def decode_head(data: bytes, path: Optional[str] = None) -> LinearHead:
    reader = _Reader(data, path)
    magic, version, n_classes, dim = reader.unpack(_HEAD_HEADER, "header")
    reader.check_magic(HEAD_MAGIC, version, magic)
    weights = reader.array('<f8', n_classes * dim, "weights").reshape(n_classes, dim)
    bias = reader.array('<f8', n_classes, "bias")
    anchor_weights = reader.array('<f8', n_classes * dim, "anchor weights").reshape(n_classes, dim)
    anchor_bias = reader.array('<f8', n_classes, "anchor bias")
    reader.finish()
    try:
        return LinearHead(weights, bias, anchor_weights, anchor_bias)
    except InvalidInputError as e:
        raise reader.error(str(e), offset=_HEAD_HEADER.size)


def write_head_file(head: LinearHead, path: str):
    _write_bytes(path, encode_head(head))
    logger.info(f"💾 Head checkpoint written to {path}")


def read_head_file(path: str) -> LinearHead:
    return decode_head(_read_bytes(path), path)


def encode_mlp(mlp: Mlp) -> bytes:
    parts = [_MLP_HEADER.pack(MLP_MAGIC, FORMAT_VERSION, mlp.n_layers)]
    for fan_in, fan_out in zip(mlp.layer_sizes[:-1], mlp.layer_sizes[1:]):
        parts.append(struct.pack('<II', fan_in, fan_out))
    for w, b in zip(mlp.weights, mlp.biases):
        parts.append(w.astype('<f8').tobytes(order='C'))
        parts.append(b.astype('<f8').tobytes())
    return b''.join(parts)


def decode_mlp(data: bytes, path: Optional[str] = None, output_transform: str = 'logits') -> Mlp:
    reader = _Reader(data, path)
    magic, version, n_layers = reader.unpack(_MLP_HEADER, "header")
    reader.check_magic(MLP_MAGIC, version, magic)
    if n_layers < 1:
        raise reader.error("layer count must be positive", offset=8)

    pair = struct.Struct('<II')
    dims = []
    for k in range(n_layers):
        pair_offset = reader.offset
        fan_in, fan_out = reader.unpack(pair, f"layer {k} dims")
        if dims and dims[-1][1] != fan_in:
            raise reader.error(f"layer {k} input {fan_in} does not chain with previous output {dims[-1][1]}",
                               offset=pair_offset)
        dims.append((fan_in, fan_out))

    weights, biases = [], []
    for k, (fan_in, fan_out) in enumerate(dims):
        weights.append(reader.array('<f8', fan_in * fan_out, f"layer {k} weights").reshape(fan_out, fan_in))
        biases.append(reader.array('<f8', fan_out, f"layer {k} bias"))
    reader.finish()

    layer_sizes = [dims[0][0]] + [fan_out for _, fan_out in dims]
    return Mlp(layer_sizes, weights, biases, output_transform)


def write_mlp_file(mlp: Mlp, path: str):
    _write_bytes(path, encode_mlp(mlp))
    logger.info(f"💾 Network checkpoint written to {path}")


def read_mlp_file(path: str, output_transform: str = 'logits') -> Mlp:
    return decode_mlp(_read_bytes(path), path, output_transform)


# ---------------------------------------------------------------------------
# JSON и таблицы
# ---------------------------------------------------------------------------

def write_json(data: Dict, path: str):
    """Запись JSON с сортировкой ключей (побитовая воспроизводимость)"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write('\n')


def read_json(path: str) -> Dict:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except FileNotFoundError:
        raise ParseError("file not found", 0, path)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", e.pos, path)


def write_table(frame: pd.DataFrame, path: str):
    """CSV с полной точностью float"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False, float_format='%.17g')
