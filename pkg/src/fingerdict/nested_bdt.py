"""
Leaf-oriented, level-linked nested Balanced Distributed Tree.

A tree of height h has leaves at level h and a node at level i has at most
degree_at(i) children, so level i holds node_count_at(i) nodes when full.
The children of every bottom node (level h-1) are organized once more as a
nested tree of height h-1, recursively, and every leaf keeps links to its
copies in those nested trees. Keys arrive at the tail only.

Routing arrays hold the maximum key of each child subtree and are served by
TailDynamicIndex, so a tail append touches the rightmost path only.
"""
import logging
from dataclasses import dataclass
from typing import Optional

from .exceptions import (EmptyStructure, KeyAbsent, KeyNotGreaterThanMax, StaleFinger,
                         TargetBeyondArray)
from .predecessor_index import DEFAULT_STEPS_PER_UPDATE, TailDynamicIndex

logger = logging.getLogger(__name__)

KEY_BITS = 64
SATURATION = 1 << 63


def degree_at(i):
    """
    Maximum number of children of a level-i node.

    Args:
        i (int): Level index, i >= 0.

    Returns:
        int: 2 for i = 0, else 2^(2^(i-1)), saturated at 2^63.
    """
    if i < 0:
        raise ValueError(f"Level must be nonnegative, got {i}")
    if i == 0:
        return 2
    exponent = 1 << (i - 1)
    if exponent >= KEY_BITS - 1:
        return SATURATION
    return 1 << exponent


def node_count_at(i):
    """
    Number of level-i nodes in a full tree, t(0) = 1 and t(i) = t(i-1) * d(i-1).

    Saturates at 2^63 like degree_at.
    """
    if i < 0:
        raise ValueError(f"Level must be nonnegative, got {i}")
    count = 1
    for level in range(i):
        count = min(count * degree_at(level), SATURATION)
    return count


def capacity_height(n):
    """
    Smallest height h whose tree holds n leaves (node_count_at(h) >= n).

    Args:
        n (int): Leaf count, n >= 1.
    """
    if n < 1:
        raise ValueError(f"Leaf count must be positive, got {n}")
    h = 0
    while node_count_at(h) < n:
        h += 1
    return h


def nested_level_select(i, s, A):
    """
    Pick the nested collection that holds both the finger and s.

    Evaluates the block-end formula A[floor(i div 2^(2^j)) * 2^(2^j) + 2^(2^j)]
    for j = 0, 1, 2, ... and returns the first j with s at most that entry.
    Indexes past the end of A clamp to its last entry.

    Args:
        i (int): 1-based finger position in A.
        s (int): Target key, s > A[i].
        A (sequence): Strictly increasing routing keys.

    Returns:
        int: The smallest qualifying j.

    Raises:
        TargetBeyondArray: If s exceeds the last entry of A.
    """
    m = len(A)
    if s > A[m - 1]:
        raise TargetBeyondArray(f"Target {s} exceeds the last routing key {A[m - 1]}")
    j = 0
    while True:
        block = 1 << (1 << j)
        index = min(m, (i // block) * block + block)
        if s <= A[index - 1]:
            return j
        j += 1


@dataclass(frozen=True)
class FingerHandle:
    """Stable reference to a stored element: its 0-based rank and its key."""
    position: int
    key: int


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    violation: Optional[str] = None


class Leaf:
    """A stored element at one nesting level.

    ``index`` is the element's 0-based rank in the whole forest, shared by all
    of its copies. ``position`` is its 1-based slot among its parent's children.
    ``copy_links[j]`` leads to the copy at nesting level j + 1 (outer leaves only).
    """

    __slots__ = ('key', 'index', 'position', 'copy_links', 'parent')

    def __init__(self, key, index):
        self.key = key
        self.index = index
        self.position = 1
        self.copy_links = ()
        self.parent = None

    @property
    def low(self):
        return self.key


class LevelNode:
    """Internal node: routing array A over its children plus level links."""

    __slots__ = ('level', 'pred_index', 'children', 'parent', 'left_neighbor',
                 'right_neighbor', 'nesting_id', 'low', 'nested')

    def __init__(self, level, nesting_id, low, steps_per_update):
        self.level = level
        self.nesting_id = nesting_id
        self.low = low
        self.pred_index = TailDynamicIndex(steps_per_update=steps_per_update)
        self.children = []
        self.parent = None
        self.left_neighbor = None
        self.right_neighbor = None
        self.nested = None

    @property
    def routing_keys(self):
        return self.pred_index.keys


def _leftmost_leaf(node):
    while not isinstance(node, Leaf):
        node = node.children[0]
    return node


def _rightmost_leaf(node):
    while not isinstance(node, Leaf):
        node = node.children[-1]
    return node


class _BDTree:
    """One tree of fixed height, either the outer tree or a nested one."""

    def __init__(self, height, depth, base, steps_per_update):
        self.height = height
        self.depth = depth
        self.base = base
        self.size = 0
        self.root = None
        self.single = None
        self.steps_per_update = steps_per_update
        self.rightmost = [None] * height
        # spans[i]: leaves under one level-i node
        self.spans = [1] * (height + 1)
        for i in range(height - 1, -1, -1):
            self.spans[i] = self.spans[i + 1] * degree_at(i)

    @property
    def capacity(self):
        return self.spans[0]

    def append_steps(self, key, index):
        """Attach a new rightmost leaf, yielding once per unit of work.

        Returns the list of the element's leaves, this tree's first, then one
        per deeper nesting level.
        """
        leaf = Leaf(key, index)
        height = self.height
        if height == 0:
            self.single = leaf
            self.size = 1
            yield 1
            return [leaf]
        p = self.size
        created = [False] * height
        for i in range(height):
            if p % self.spans[i]:
                continue
            node = LevelNode(i, self.depth, key, self.steps_per_update)
            previous = self.rightmost[i]
            if previous is not None:
                previous.right_neighbor = node
                node.left_neighbor = previous
            if i == 0:
                self.root = node
            else:
                parent = self.rightmost[i - 1]
                node.parent = parent
                parent.children.append(node)
            if i == height - 1 and height > 1:
                node.nested = _BDTree(height - 1, self.depth + 1, index, self.steps_per_update)
            self.rightmost[i] = node
            created[i] = True
            yield 1
        bottom = self.rightmost[height - 1]
        leaf.parent = bottom
        bottom.children.append(leaf)
        leaf.position = len(bottom.children)
        self.size += 1
        yield 1
        for i in range(height - 1, -1, -1):
            node = self.rightmost[i]
            if i == height - 1 or created[i + 1]:
                node.pred_index.append_tail(key)
            else:
                node.pred_index.replace_tail(key)
            yield 1
        chain = [leaf]
        if bottom.nested is not None:
            deeper = yield from bottom.nested.append_steps(key, index)
            chain.extend(deeper)
        return chain

    def pop_steps(self):
        """Detach the rightmost leaf, yielding once per unit of work."""
        height = self.height
        if height == 0:
            self.single = None
            self.size = 0
            yield 1
            return
        bottom = self.rightmost[height - 1]
        bottom.children.pop()
        self.size -= 1
        if bottom.nested is not None:
            yield from bottom.nested.pop_steps()
        emptied = [False] * height
        for i in range(height - 1, -1, -1):
            node = self.rightmost[i]
            if i < height - 1 and emptied[i + 1]:
                node.children.pop()
            if not node.children:
                emptied[i] = True
                left = node.left_neighbor
                if left is not None:
                    left.right_neighbor = None
                self.rightmost[i] = left
                if i == 0:
                    self.root = None
            yield 1
        if not self.size:
            return
        new_max = self.rightmost[height - 1].children[-1].key
        for i in range(height):
            if emptied[i]:
                continue
            node = self.rightmost[i]
            if i == height - 1 or emptied[i + 1]:
                node.pred_index.pop_tail()
            else:
                node.pred_index.replace_tail(new_max)
            yield 1


class NestedForest:
    """
    Tail-update nested BDT over strictly increasing 64-bit keys.

    Appends and removals touch the rightmost path of every nesting level.
    When the leaf count exceeds the capacity of the current height, the
    forest is rebuilt at capacity_height(n). After removals it keeps its
    height until n falls to half the capacity of the level below.
    ``append_steps`` and ``remove_steps`` expose that work as a generator of
    unit steps so callers can spread it.
    """

    def __init__(self, steps_per_update=DEFAULT_STEPS_PER_UPDATE):
        self._steps_per_update = steps_per_update
        self._tree = _BDTree(0, 0, 0, steps_per_update)
        self._leaves = []
        self.probe_count = 0
        self.last_probes = 0
        self.rebuilds = 0

    @classmethod
    def from_sorted(cls, keys, steps_per_update=DEFAULT_STEPS_PER_UPDATE):
        forest = cls(steps_per_update)
        for key in keys:
            forest.append_leaf(key)
        return forest

    def __len__(self):
        return len(self._leaves)

    @property
    def leaf_count(self):
        return len(self._leaves)

    @property
    def height(self):
        return self._tree.height

    @property
    def nesting_depth(self):
        return max(0, self._tree.height - 1)

    @property
    def outer_root(self):
        return self._tree.root

    @property
    def tail_leaf(self):
        return self._leaves[-1] if self._leaves else None

    def keys(self):
        return [leaf.key for leaf in self._leaves]

    def leaf_at(self, position):
        return self._leaves[position]

    def handle_at(self, position):
        leaf = self._leaves[position]
        return FingerHandle(position, leaf.key)

    def resolve(self, handle):
        """
        Map a handle to its outer leaf.

        Raises:
            StaleFinger: If the handle's element is no longer stored at its rank.
        """
        position = handle.position
        if 0 <= position < len(self._leaves):
            leaf = self._leaves[position]
            if leaf.key == handle.key:
                return leaf
        raise StaleFinger(f"Finger at rank {position} with key {handle.key} is no longer stored")

    # --- updates ---

    def append_steps(self, key):
        """
        Validate a tail append and return the generator that performs it.

        The generator yields once per unit of work and returns the new
        FingerHandle. Searches for keys already stored stay correct while
        it is suspended.

        Raises:
            KeyNotGreaterThanMax: If key does not exceed the current maximum.
        """
        if self._leaves and key <= self._leaves[-1].key:
            raise KeyNotGreaterThanMax(f"Key {key} is not greater than current maximum {self._leaves[-1].key}")
        return self._append_gen(key)

    def _append_gen(self, key):
        n = len(self._leaves)
        if n + 1 > self._tree.capacity:
            yield from self._rebuild_gen(capacity_height(n + 1))
        position = len(self._leaves)
        chain = yield from self._tree.append_steps(key, position)
        leaf = chain[0]
        leaf.copy_links = tuple(chain[1:])
        self._leaves.append(leaf)
        return FingerHandle(position, key)

    def append_leaf(self, key):
        """
        Append a key larger than every stored key.

        Returns:
            FingerHandle: Handle to the new tail leaf.

        Raises:
            KeyNotGreaterThanMax: If key does not exceed the current maximum.
        """
        steps = self.append_steps(key)
        while True:
            try:
                next(steps)
            except StopIteration as done:
                return done.value

    def remove_steps(self):
        """
        Validate a tail removal and return the generator that performs it.

        Raises:
            EmptyStructure: If the forest holds no leaves.
        """
        if not self._leaves:
            raise EmptyStructure("Cannot remove from an empty forest")
        return self._remove_gen()

    def _remove_gen(self):
        key = self._leaves[-1].key
        yield from self._tree.pop_steps()
        self._leaves.pop()
        n = len(self._leaves)
        if n == 0:
            self._tree = _BDTree(0, 0, 0, self._steps_per_update)
        elif self._should_shrink(n):
            yield from self._rebuild_gen(capacity_height(n))
        return key

    def _should_shrink(self, n):
        # Shrink only at n <= t(h-1) // 2
        height = self._tree.height
        return height > 0 and n <= node_count_at(height - 1) // 2

    def remove_tail_leaf(self):
        """
        Remove the rightmost leaf with all its nested copies.

        Returns:
            int: The removed key.

        Raises:
            EmptyStructure: If the forest holds no leaves.
        """
        steps = self.remove_steps()
        while True:
            try:
                next(steps)
            except StopIteration as done:
                return done.value

    def _rebuild_gen(self, height):
        logger.debug("Rebuilding nested forest from height %d to %d over %d leaves",
                     self._tree.height, height, len(self._leaves))
        tree = _BDTree(height, 0, 0, self._steps_per_update)
        leaves = []
        for position, old in enumerate(self._leaves):
            chain = yield from tree.append_steps(old.key, position)
            chain[0].copy_links = tuple(chain[1:])
            leaves.append(chain[0])
        self._tree = tree
        self._leaves = leaves
        self.rebuilds += 1

    # --- search ---

    def _index_probe(self, node, s):
        index = node.pred_index
        before = index.probe_count
        hit = index.predecessor(s)
        return hit, index.probe_count - before

    def _descend(self, node, s):
        """Predecessor of s inside node's subtree, given node.low <= s."""
        probes = 0
        while True:
            hit, used = self._index_probe(node, s)
            probes += used
            children = node.children
            if hit is None:
                child = children[0]
            else:
                position, key = hit
                if key == s or position == len(children):
                    return _rightmost_leaf(children[position - 1]), probes
                following = children[position]
                probes += 1
                if following.low <= s:
                    child = following
                else:
                    return _rightmost_leaf(children[position - 1]), probes
            if isinstance(child, Leaf):
                return child, probes
            node = child

    @staticmethod
    def _covers(node, s, rightward):
        if rightward:
            neighbor = node.right_neighbor
            return neighbor is None or s < neighbor.low
        return node.low <= s

    def _select_depth(self, bottom, leaf, s, rightward, height):
        """Relative nesting depth m whose tree holds both leaf and the predecessor of s."""
        children = bottom.children
        i = leaf.position
        probes = 0
        if rightward:
            j = nested_level_select(i, s, bottom.routing_keys)
            probes += j + 1
            m = max(1, height - 1 - j)
            while m > 1:
                block = node_count_at(height - m)
                end = ((i - 1) // block) * block + block
                probes += 1
                if end >= len(children) or s < children[end].key:
                    break
                m -= 1
            return m, probes
        j = 0
        while True:
            block = 1 << (1 << j)
            start = ((i - 1) // block) * block
            probes += 1
            if children[start].key <= s:
                return max(1, height - 1 - j), probes
            j += 1

    def finger_predecessor(self, f, s):
        """
        Finger search for the largest stored key <= s, starting at f.

        Follows fsearch: when s is routed under the finger's parent, the
        nested collection holding both is selected and the search continues
        from the finger's copy there; otherwise the search climbs by parent
        and level links, jumping to a neighbor subtree when it covers s, and
        descends through the routing indexes.

        Args:
            f (FingerHandle): Starting finger.
            s (int): Target key.

        Returns:
            FingerHandle or None: Handle of the predecessor, None if s is below every key.
        """
        leaf = self.resolve(f)
        if leaf.key == s:
            self.last_probes = 0
            return FingerHandle(leaf.index, s)
        probes = 0
        position = leaf.index
        depth = 0
        result = None
        while True:
            outer = self._leaves[position]
            current = outer if depth == 0 else outer.copy_links[depth - 1]
            probes += 1
            if current.key == s:
                result = current
                break
            rightward = s > current.key
            parent = current.parent
            if parent is None:
                result = current if rightward else None
                break
            height = self._tree.height - depth
            probes += 1
            if self._covers(parent, s, rightward):
                children = parent.children
                if height == 1:
                    result, used = self._descend(parent, s)
                    probes += used
                    break
                if rightward:
                    probes += 1
                    routed = parent.routing_keys
                    if s >= routed[-1]:
                        result = children[len(routed) - 1]
                        break
                m, used = self._select_depth(parent, current, s, rightward, height)
                probes += used
                depth += m
                continue
            node = parent
            restart = None
            while True:
                neighbor = node.right_neighbor if rightward else node.left_neighbor
                if neighbor is not None:
                    probes += 1
                    if self._covers(neighbor, s, rightward):
                        restart = _leftmost_leaf(neighbor) if rightward else _rightmost_leaf(neighbor)
                        break
                node = node.parent
                if node is None:
                    break
                probes += 1
                if self._covers(node, s, rightward):
                    break
            if restart is not None:
                position = restart.index
                continue
            if node is None:
                result = None
                break
            result, used = self._descend(node, s)
            probes += used
            break
        self.last_probes = probes
        self.probe_count += probes
        if result is None:
            return None
        return FingerHandle(result.index, result.key)

    def fsearch(self, f, s):
        """
        Finger search for a stored key.

        Args:
            f (FingerHandle): Starting finger.
            s (int): Key to find.

        Returns:
            FingerHandle: Handle of the leaf holding s.

        Raises:
            KeyAbsent: If s is not stored.
            StaleFinger: If f is no longer valid.
        """
        found = self.finger_predecessor(f, s)
        if found is None or found.key != s:
            raise KeyAbsent(f"Key {s} is not stored in the forest")
        return found

    # --- accounting and checks ---

    def space_cells(self):
        """Nodes + routing entries + leaves (all copies) + copy links."""
        cells = 0
        for leaf in self._leaves:
            cells += 1 + 2 * len(leaf.copy_links)
        for node in self._iter_nodes():
            cells += 1 + len(node.pred_index)
        return cells

    def _iter_nodes(self):
        stack = [self._tree.root] if self._tree.root is not None else []
        while stack:
            node = stack.pop()
            yield node
            for child in node.children:
                if isinstance(child, LevelNode):
                    stack.append(child)
            if node.nested is not None and node.nested.root is not None:
                stack.append(node.nested.root)


def _tree_leaves(tree):
    if tree.height == 0:
        return [tree.single] if tree.single is not None else []
    leaves = []
    node = tree.rightmost[tree.height - 1]
    # walk the bottom level right to left through level links
    while node is not None:
        leaves.extend(reversed(node.children))
        node = node.left_neighbor
    leaves.reverse()
    return leaves


def _check_tree(tree, errors):
    """Check the node invariants of one tree; return its leaves in order."""
    height = tree.height
    if height == 0:
        return _tree_leaves(tree)
    for level in range(height):
        node = tree.rightmost[level]
        right = None
        while node is not None:
            keys = node.routing_keys
            for p in range(1, len(keys)):
                if keys[p - 1] >= keys[p]:
                    errors.append("routing_keys strictly increasing")
                    return []
            if len(node.children) > degree_at(level):
                errors.append("m <= degree_at(level)")
                return []
            if right is not None and len(node.children) != degree_at(level):
                errors.append("only the rightmost node of a level is partially filled")
                return []
            if len(keys) != len(node.children):
                errors.append("one routing key per child")
                return []
            for p, child in enumerate(node.children):
                if _rightmost_leaf(child).key != keys[p]:
                    errors.append("A[p] = maximum key in the subtree of child p")
                    return []
                if child.parent is not node:
                    errors.append("child parent link")
                    return []
                if isinstance(child, Leaf) and child.position != p + 1:
                    errors.append("leaf position matches its slot")
                    return []
            if node.low != _leftmost_leaf(node).key:
                errors.append("node low equals its smallest key")
                return []
            if right is not None:
                if right.low <= keys[-1]:
                    errors.append("right_neighbor's smallest routed key exceeds A[m]")
                    return []
                if right.left_neighbor is not node:
                    errors.append("level links are symmetric")
                    return []
            index = node.pred_index
            saved = index.base.probe_count
            for p, key in enumerate(keys):
                if index.predecessor(key) != (p + 1, key):
                    errors.append("pred_index answers predecessor queries consistently")
                    return []
                below = index.predecessor(key - 1)
                expected = (p, keys[p - 1]) if p else None
                if below != expected:
                    errors.append("pred_index answers predecessor queries consistently")
                    return []
            index.base.probe_count = saved
            right = node
            node = node.left_neighbor
    leaves = _tree_leaves(tree)
    if height > 1:
        node = tree.rightmost[height - 1]
        while node is not None:
            nested = node.nested
            nested_leaves = _check_tree(nested, errors) if nested is not None else []
            if errors:
                return []
            if [leaf.key for leaf in nested_leaves] != [leaf.key for leaf in node.children]:
                errors.append("nested tree holds exactly its bottom node's children")
                return []
            node = node.left_neighbor
    return leaves


def validate(forest):
    """
    Exhaustively check the forest's structural invariants.

    Args:
        forest (NestedForest): The forest to check.

    Returns:
        ValidationResult: ok, or the first violated invariant.
    """
    n = forest.leaf_count
    if n == 0:
        return ValidationResult(True)
    lower = capacity_height(n)
    if forest.height != lower and not (
            forest.height == lower + 1 and n > node_count_at(forest.height - 1) // 2):
        return ValidationResult(False, "height = capacity_height(leaf_count), or one above until leaf_count halves")
    if forest.nesting_depth > forest.height:
        return ValidationResult(False, "nesting_depth <= height")
    errors = []
    leaves = _check_tree(forest._tree, errors)
    if errors:
        return ValidationResult(False, errors[0])
    if len(leaves) != n or any(a is not b for a, b in zip(leaves, forest._leaves)):
        return ValidationResult(False, "in-order traversal of leaves matches the leaf list")
    for position, leaf in enumerate(leaves):
        if position and leaves[position - 1].key >= leaf.key:
            return ValidationResult(False, "in-order traversal of leaves yields keys in strictly increasing order")
        if leaf.index != position:
            return ValidationResult(False, "leaf rank matches its position")
        if len(leaf.copy_links) > forest.nesting_depth:
            return ValidationResult(False, "copy_links length <= nesting_depth(n)")
        for j, copy in enumerate(leaf.copy_links):
            if copy.key != leaf.key or copy.index != position or copy.parent.nesting_id != j + 1:
                return ValidationResult(False, "following copy_links[j] reaches a leaf with the same key at nesting level j")
    return ValidationResult(True)
