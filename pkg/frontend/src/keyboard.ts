/**
 * Keyboard bindings for the review pass. Raters traverse hundreds of codes,
 * so everything reachable by mouse is also one keystroke:
 *
 *   g        toggle "groundedness issue"
 *   b        toggle "overly broad"
 *   Enter/Space  save current card and advance
 *   ArrowRight/ArrowLeft (or j/k)  move without saving
 */

export interface ReviewKeyActions {
  toggleGroundedness: () => void;
  toggleBroad: () => void;
  saveAndNext: () => void;
  next: () => void;
  prev: () => void;
}

export function reviewKeydownHandler(actions: ReviewKeyActions): (ev: KeyboardEvent) => void {
  return (ev: KeyboardEvent) => {
    if (ev.target instanceof HTMLInputElement || ev.target instanceof HTMLTextAreaElement) {
      return;
    }
    switch (ev.key) {
      case "g":
        actions.toggleGroundedness();
        break;
      case "b":
        actions.toggleBroad();
        break;
      case "Enter":
      case " ":
        actions.saveAndNext();
        break;
      case "ArrowRight":
      case "j":
        actions.next();
        break;
      case "ArrowLeft":
      case "k":
        actions.prev();
        break;
      default:
        return;
    }
    ev.preventDefault();
  };
}
