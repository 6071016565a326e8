"""文書の読み書き（JSON / YAML / CSV / JSON Lines）とテキスト表の整形"""

import csv
import io
import json
import os
import sys
from pathlib import Path

import yaml

from .errors import InputError


def load_document(path):
    """マニフェストや入力データを読み込み（拡張子で YAML / JSON を判定）"""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            if str(path).lower().endswith(('.yaml', '.yml')):
                return yaml.safe_load(f)
            return json.load(f)
    except OSError as e:
        raise InputError(f"{path}: cannot read ({e.strerror})") from None
    except (yaml.YAMLError, json.JSONDecodeError) as e:
        raise InputError(f"{path}: malformed document: {e}") from None


def dump_json(data):
    """キー順を保ったまま JSON 文字列に変換"""
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def write_output(text, out=None, stream=None):
    """out が None または "-" なら標準出力、それ以外はファイルに書き込み"""
    if out is None or out == "-":
        target = stream or sys.stdout
        target.write(text if isinstance(text, str) else text.decode("utf-8"))
        target.flush()
        return
    mode = 'w' if isinstance(text, str) else 'wb'
    try:
        if mode == 'w':
            with open(out, mode, encoding='utf-8', newline='') as f:
                f.write(text)
        else:
            with open(out, mode) as f:
                f.write(text)
    except OSError as e:
        raise InputError(f"{out}: cannot write ({e.strerror})") from None


def csv_text(header, rows):
    """CSV 生成"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()


def jsonl_text(records):
    """1 レコード 1 行の JSON Lines"""
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)


def read_csv_columns(path):
    """ヘッダー行をラベルとして列ごとの値リストを返す（空セルは読み飛ばす）"""
    try:
        with open(Path(path), 'r', encoding='utf-8', newline='') as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise InputError(f"{path}: cannot read ({e.strerror})") from None
    if not rows:
        raise InputError(f"{path}: empty CSV file")
    header = [h.strip() for h in rows[0]]
    columns = {label: [] for label in header}
    for lineno, row in enumerate(rows[1:], start=2):
        for label, cell in zip(header, row):
            cell = cell.strip()
            if cell:
                columns[label].append((lineno, cell))
    return columns


def use_color(stream):
    """MC_NO_COLOR が設定されているか端末でなければ装飾しない"""
    if os.environ.get("MC_NO_COLOR"):
        return False
    return hasattr(stream, "isatty") and stream.isatty()


def render_table(header, rows, color=False):
    """列幅を揃えたテキスト表"""
    cells = [[str(c) for c in header]] + [[str(c) for c in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = []
    for n, row in enumerate(cells):
        text = "  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
        if n == 0 and color:
            text = f"\033[1m{text}\033[0m"
        lines.append(text)
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
