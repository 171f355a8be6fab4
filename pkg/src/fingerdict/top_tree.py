"""
Leaf-oriented, level-linked B-tree over bucket separators.

Leaves carry a separator key and a bucket payload; every node routes by the
low keys of its children through a SmallSetIndex, and all nodes of one
level are chained by left/right links. Finger search walks up from a leaf,
checking the node and its same-level neighbor in the search direction, and
turns around at the first node whose span covers the target.
"""
import logging

from .exceptions import EmptyStructure, KeyOutOfFingerRange
from .nested_bdt import ValidationResult
from .predecessor_index import SmallSetIndex

logger = logging.getLogger(__name__)

DEFAULT_FANOUT = 8


class TopLeaf:
    __slots__ = ('key', 'bucket', 'parent', 'left', 'right')

    def __init__(self, key, bucket):
        self.key = key
        self.bucket = bucket
        self.parent = None
        self.left = None
        self.right = None

    @property
    def low(self):
        return self.key


class TopNode:
    """Internal node; ``level`` 1 holds leaves."""

    __slots__ = ('level', 'children', 'parent', 'left', 'right', 'low', 'index')

    def __init__(self, level):
        self.level = level
        self.children = []
        self.parent = None
        self.left = None
        self.right = None
        self.low = None
        self.index = SmallSetIndex()


def _link_after(anchor, node):
    node.left = anchor
    node.right = anchor.right
    if anchor.right is not None:
        anchor.right.left = node
    anchor.right = node


def _unlink(node):
    if node.left is not None:
        node.left.right = node.right
    if node.right is not None:
        node.right.left = node.left
    node.left = None
    node.right = None


class LevelLinkedTree:
    """
    Level-linked B-tree with at most ``fanout`` children per node.

    Every non-root node keeps at least ceil(fanout / 2) children.
    """

    def __init__(self, fanout=DEFAULT_FANOUT):
        if fanout < 3:
            raise ValueError("fanout must be at least 3")
        self.fanout = fanout
        self.min_fill = (fanout + 1) // 2
        self.root = None
        self.size = 0
        self.work_units = 0
        self.probe_count = 0
        self.last_probes = 0

    def __len__(self):
        return self.size

    @property
    def height(self):
        return self.root.level if self.root is not None else 0

    def first_leaf(self):
        node = self.root
        if node is None:
            return None
        while isinstance(node, TopNode):
            node = node.children[0]
        return node

    def last_leaf(self):
        node = self.root
        if node is None:
            return None
        while isinstance(node, TopNode):
            node = node.children[-1]
        return node

    def leaves(self):
        leaf = self.first_leaf()
        while leaf is not None:
            yield leaf
            leaf = leaf.right

    # --- maintenance ---

    def _touch(self, node):
        """Recompute node lows and routing indexes upward while lows change."""
        while node is not None:
            old_low = node.low
            node.low = node.children[0].low
            node.index = SmallSetIndex([child.low for child in node.children])
            self.work_units += len(node.children)
            if node.low == old_low:
                break
            node = node.parent

    def _grow(self, node):
        while len(node.children) > self.fanout:
            half = (len(node.children) + 1) // 2
            sibling = TopNode(node.level)
            sibling.children = node.children[half:]
            node.children = node.children[:half]
            for child in sibling.children:
                child.parent = sibling
            _link_after(node, sibling)
            parent = node.parent
            if parent is None:
                parent = TopNode(node.level + 1)
                parent.children = [node, sibling]
                node.parent = parent
                self.root = parent
                logger.debug("Top tree grew to height %d", parent.level)
            else:
                parent.children.insert(parent.children.index(node) + 1, sibling)
            sibling.parent = parent
            self._touch(node)
            self._touch(sibling)
            node = parent
        self._touch(node)

    def _shrink(self, node):
        while True:
            if node is self.root:
                if not node.children:
                    self.root = None
                    return
                if len(node.children) == 1 and isinstance(node.children[0], TopNode):
                    self.root = node.children[0]
                    self.root.parent = None
                    logger.debug("Top tree shrank to height %d", self.root.level)
                    return
                self._touch(node)
                return
            if len(node.children) >= self.min_fill:
                self._touch(node)
                return
            parent = node.parent
            left = node.left if node.left is not None and node.left.parent is parent else None
            right = node.right if node.right is not None and node.right.parent is parent else None
            if left is not None and len(left.children) > self.min_fill:
                moved = left.children.pop()
                moved.parent = node
                node.children.insert(0, moved)
                self._touch(left)
                self._touch(node)
                return
            if right is not None and len(right.children) > self.min_fill:
                moved = right.children.pop(0)
                moved.parent = node
                node.children.append(moved)
                self._touch(node)
                self._touch(right)
                return
            if left is not None:
                keep, gone = left, node
            elif right is not None:
                keep, gone = node, right
            else:
                self._touch(node)
                node = parent
                continue
            for child in gone.children:
                child.parent = keep
            keep.children.extend(gone.children)
            gone.children = []
            parent.children.remove(gone)
            _unlink(gone)
            self._touch(keep)
            node = parent

    # --- updates ---

    def insert_front(self, key, bucket):
        """
        Insert a leaf before every existing leaf.

        Raises:
            KeyOutOfFingerRange: If key is not below the current first key.
        """
        leaf = TopLeaf(key, bucket)
        if self.root is None:
            self.root = TopNode(1)
            self.root.children = [leaf]
            leaf.parent = self.root
            self.size = 1
            self._touch(self.root)
            return leaf
        first = self.first_leaf()
        if key >= first.key:
            raise KeyOutOfFingerRange(f"Front key {key} is not below first key {first.key}")
        parent = first.parent
        parent.children.insert(0, leaf)
        leaf.parent = parent
        leaf.right = first
        first.left = leaf
        self.size += 1
        self._grow(parent)
        return leaf

    def insert_after(self, anchor, key, bucket):
        """
        Insert a leaf directly after ``anchor``.

        Raises:
            KeyOutOfFingerRange: If key does not fit between anchor and its right neighbor.
        """
        if key <= anchor.key or (anchor.right is not None and key >= anchor.right.key):
            raise KeyOutOfFingerRange(f"Key {key} does not fit after separator {anchor.key}")
        leaf = TopLeaf(key, bucket)
        parent = anchor.parent
        parent.children.insert(parent.children.index(anchor) + 1, leaf)
        leaf.parent = parent
        _link_after(anchor, leaf)
        self.size += 1
        self._grow(parent)
        return leaf

    def delete(self, leaf):
        """
        Remove a leaf.

        Raises:
            EmptyStructure: If the tree is empty.
        """
        if self.root is None:
            raise EmptyStructure("Cannot delete from an empty top tree")
        parent = leaf.parent
        parent.children.remove(leaf)
        _unlink(leaf)
        leaf.parent = None
        self.size -= 1
        self._shrink(parent)

    def update_key(self, leaf, key):
        """
        Change a leaf's separator in place.

        Raises:
            KeyOutOfFingerRange: If key would break the order with the neighbors.
        """
        if (leaf.left is not None and key <= leaf.left.key) or (leaf.right is not None and key >= leaf.right.key):
            raise KeyOutOfFingerRange(f"Separator {key} breaks order around {leaf.key}")
        leaf.key = key
        self._touch(leaf.parent)

    # --- search ---

    @staticmethod
    def _covers(node, s, rightward):
        if rightward:
            return node.right is None or s < node.right.low
        return node.low <= s

    def _descend(self, node, s):
        probes = 0
        while isinstance(node, TopNode):
            before = node.index.probe_count
            hit = node.index.predecessor(s)
            probes += node.index.probe_count - before
            node = node.children[hit[0] - 1]
        return node, probes

    def finger_predecessor(self, leaf, s):
        """
        Leaf with the largest separator <= s, searched from ``leaf``.

        Walks toward the root checking each node and its neighbor in the
        search direction, then descends from the first covering node.

        Returns:
            TopLeaf or None: None if s is below every separator.
        """
        probes = 0
        result = None
        if leaf.key == s:
            result = leaf
        else:
            rightward = s > leaf.key
            node = leaf
            while node is not None:
                probes += 1
                if self._covers(node, s, rightward):
                    result, used = self._descend(node, s)
                    probes += used
                    break
                neighbor = node.right if rightward else node.left
                if neighbor is not None:
                    probes += 1
                    if self._covers(neighbor, s, rightward):
                        result, used = self._descend(neighbor, s)
                        probes += used
                        break
                node = node.parent
        self.last_probes = probes
        self.probe_count += probes
        return result

    def predecessor(self, s):
        """Root-to-leaf predecessor search without a finger."""
        root = self.root
        if root is None or s < root.low:
            self.last_probes = 1
            return None
        result, probes = self._descend(root, s)
        self.last_probes = probes + 1
        self.probe_count += self.last_probes
        return result

    # --- accounting and checks ---

    def _levels(self):
        level = self.root
        while level is not None:
            yield level
            level = level.children[0] if isinstance(level, TopNode) else None

    def space_cells(self):
        cells = 0
        for head in self._levels():
            node = head
            while node is not None:
                cells += 1 + (len(node.children) if isinstance(node, TopNode) else 0)
                node = node.right
        return cells

    def validate(self):
        """
        Check ordering, fill, routing and level-link invariants.

        Returns:
            ValidationResult: ok, or the first violated invariant.
        """
        if self.root is None:
            return ValidationResult(self.size == 0, None if self.size == 0 else "size matches leaves")
        count = 0
        for head in self._levels():
            node = head
            previous = None
            while node is not None:
                if node.left is not previous:
                    return ValidationResult(False, "level links are symmetric")
                if previous is not None and previous.low >= node.low:
                    return ValidationResult(False, "separators strictly increasing along a level")
                if isinstance(node, TopNode):
                    if len(node.children) > self.fanout:
                        return ValidationResult(False, "children <= fanout")
                    if node is not self.root and len(node.children) < self.min_fill:
                        return ValidationResult(False, "non-root nodes at least half full")
                    if node.low != node.children[0].low:
                        return ValidationResult(False, "node low equals its first child's low")
                    if node.index.keys != tuple(child.low for child in node.children):
                        return ValidationResult(False, "routing index matches child lows")
                    for child in node.children:
                        if child.parent is not node:
                            return ValidationResult(False, "child parent link")
                        if isinstance(child, TopNode) and child.level != node.level - 1:
                            return ValidationResult(False, "all leaves at the same depth")
                else:
                    count += 1
                previous = node
                node = node.right
        if count != self.size:
            return ValidationResult(False, "size matches leaves")
        return ValidationResult(True)
