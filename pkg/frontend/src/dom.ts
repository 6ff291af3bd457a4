/** Small DOM construction helper: el("div.card", el("b", "hi"), "text"). */
export function el(
  spec: string,
  ...children: (Node | string | null | undefined)[]
): HTMLElement {
  const [tag, ...classes] = spec.split(".");
  const node = document.createElement(tag || "div");
  if (classes.length) node.className = classes.join(" ");
  for (const child of children) {
    if (child == null) continue;
    node.append(child);
  }
  return node;
}

export function button(
  label: string,
  onClick: () => void,
  className = "",
): HTMLButtonElement {
  const node = document.createElement("button");
  node.textContent = label;
  if (className) node.className = className;
  node.addEventListener("click", onClick);
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}
