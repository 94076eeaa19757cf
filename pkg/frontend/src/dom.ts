/** Thin browser layer: mount virtual nodes into real DOM elements. */

import type { VNode } from "./render.js";

export function mount(node: VNode | string, parent: Element): Node {
  if (typeof node === "string") {
    const text = document.createTextNode(node);
    parent.appendChild(text);
    return text;
  }
  const element = document.createElement(node.tag);
  for (const [key, value] of Object.entries(node.attrs)) {
    element.setAttribute(key, value);
  }
  for (const child of node.children) {
    mount(child, element);
  }
  parent.appendChild(element);
  return element;
}

export function replaceChildren(parent: Element, node: VNode): void {
  parent.innerHTML = "";
  mount(node, parent);
}
